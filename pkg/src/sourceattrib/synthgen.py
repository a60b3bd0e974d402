"""Forward simulation from the generative model, for validation studies."""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import SourcePrevalence, SurveillanceData, ValidationError
from .model import ClusterState, ModelState, lambda_ij


@dataclass
class TrueParams:
    """Ground-truth parameters behind a simulated dataset."""

    alpha: np.ndarray          # (T, L, m)
    r: np.ndarray              # (m, T, n)
    k: np.ndarray              # (m, T)
    theta_values: np.ndarray   # one value per true cluster
    cluster_labels: np.ndarray  # (n,) index into theta_values
    types: list
    sources: list
    times: list
    locations: list

    @property
    def q(self):
        return np.asarray(self.theta_values)[self.cluster_labels]

    def state(self):
        clusters = ClusterState.from_q(self.q)
        return ModelState(alpha=np.asarray(self.alpha, dtype=float),
                          r=np.asarray(self.r, dtype=float),
                          clusters=clusters)

    def lambda_arrays(self):
        lam = lambda_ij(self.state(), np.asarray(self.k, dtype=float))
        return {"lambda_i": lam.sum(axis=1), "lambda_j": lam.sum(axis=0)}

    def truth_frame(self):
        """Long-format table of every true parameter value."""
        rows = []
        T, L, m = self.alpha.shape
        n = len(self.types)
        for t in range(T):
            for l in range(L):
                for j in range(m):
                    rows.append(("alpha", "", self.sources[j], self.times[t],
                                 self.locations[l], self.alpha[t, l, j]))
        for j in range(m):
            for t in range(T):
                for i in range(n):
                    rows.append(("r", self.types[i], self.sources[j],
                                 self.times[t], "", self.r[j, t, i]))
        q = self.q
        for i in range(n):
            rows.append(("q", self.types[i], "", "", "", q[i]))
            rows.append(("cluster", self.types[i], "", "", "",
                         float(self.cluster_labels[i])))
        lam_j = self.lambda_arrays()["lambda_j"]
        for j in range(m):
            for t in range(T):
                for l in range(L):
                    rows.append(("lambda_j", "", self.sources[j],
                                 self.times[t], self.locations[l],
                                 lam_j[j, t, l]))
        return pd.DataFrame(rows, columns=["param", "type", "source", "time",
                                           "location", "value"])


def simulate(true_params, total_samples, rng):
    """Draw one surveillance dataset from the model at ``true_params``.

    ``total_samples`` is the (m, T) source sampling effort.  Positives per
    source/time are Binomial(total, k); typed counts are multinomial over
    types with the true relative prevalences; human cases are Poisson at the
    implied intensities.

    Returns (SurveillanceData, SourcePrevalence, TrueParams); the prevalence
    object carries the *empirical* estimates the fitting workflow uses.
    """
    tp = true_params
    alpha = np.asarray(tp.alpha, dtype=float)
    r = np.asarray(tp.r, dtype=float)
    k = np.asarray(tp.k, dtype=float)
    T, L, m = alpha.shape
    n = len(tp.types)
    totals = np.asarray(total_samples, dtype=np.int64)
    if totals.shape != (m, T):
        raise ValidationError(
            f"total_samples has shape {totals.shape}, expected {(m, T)}")
    lam_i = tp.lambda_arrays()["lambda_i"]  # (n, T, L)
    y = rng.poisson(lam_i)
    positives = rng.binomial(totals, k)
    x = np.zeros((n, m, T), dtype=np.int64)
    for j in range(m):
        for t in range(T):
            x[:, j, t] = rng.multinomial(positives[j, t], r[j, t])
    data = SurveillanceData(types=tp.types, sources=tp.sources,
                            times=tp.times, locations=tp.locations,
                            y=y, x=x)
    prevalence = SourcePrevalence(
        sources=tp.sources, times=tp.times,
        k=np.divide(positives, totals, out=np.zeros_like(k), where=totals > 0),
        total_samples=totals, positive_samples=positives)
    return data, prevalence, tp


def default_true_params(n_types=30, n_sources=4, times=("1", "2"),
                        locations=("A", "B"), n_clusters=3, rng=None,
                        theta_values=None):
    """A reference ground truth: a few well-separated type-effect clusters.

    Source effects and relative prevalences are drawn from moderately
    informative Dirichlet distributions; cluster labels cycle through the
    requested cluster count.
    """
    rng = np.random.default_rng(rng)
    times = [str(t) for t in times]
    locations = [str(l) for l in locations]
    T, L, m, n = len(times), len(locations), n_sources, n_types
    alpha = rng.dirichlet(np.full(m, 5.0), size=(T, L))
    r = rng.dirichlet(np.full(n, 0.8), size=(m, T))
    r = np.clip(r, 1e-9, None)
    r /= r.sum(axis=2, keepdims=True)
    k = rng.uniform(0.15, 0.85, size=(m, T))
    if theta_values is None:
        theta_values = 4.0 ** np.arange(n_clusters)  # well separated
    labels = np.arange(n) % n_clusters
    return TrueParams(alpha=alpha, r=r, k=k,
                      theta_values=np.asarray(theta_values, dtype=float),
                      cluster_labels=labels,
                      types=[str(i + 1) for i in range(n)],
                      sources=[f"Source{j + 1}" for j in range(m)],
                      times=times, locations=locations)
