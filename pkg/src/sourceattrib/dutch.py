"""Proportional-occurrence baseline attribution with bootstrap intervals.

The baseline splits each type's observed cases across sources in proportion
to the type's relative occurrence in each source; there are no source or
type effects and no noise model, so uncertainty comes from bootstrap
resampling of the data.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import ValidationError


@dataclass
class DutchResult:
    """Point attribution (and, after bootstrapping, percentile CIs)."""

    lambda_ij: np.ndarray      # (n, m) expected cases of type i from source j
    lambda_j: np.ndarray       # (m,) total cases attributed per source
    sources: list
    types: list
    ci_lower: np.ndarray = None
    ci_upper: np.ndarray = None
    n_bootstrap: int = 0

    def to_frame(self):
        df = pd.DataFrame({"source": self.sources,
                           "median": self.lambda_j})
        if self.ci_lower is not None:
            df["ci_lower"] = self.ci_lower
            df["ci_upper"] = self.ci_upper
        return df


def dutch_attribute(y, r, sources=None, types=None):
    """Point estimate: ``lambda_ij = r_ij / sum_j r_ij * y_i``.

    ``r`` is the (n, m) relative-occurrence matrix (columns need not be
    normalized; each row is normalized internally).  Rows with all-zero
    occurrence must have been removed by preprocessing.
    """
    y = np.asarray(y, dtype=float)
    r = np.asarray(r, dtype=float)
    if r.ndim != 2 or len(y) != r.shape[0]:
        raise ValidationError("y and r have incompatible shapes")
    if np.any(r < 0):
        raise ValidationError("relative occurrences must be nonnegative")
    row_tot = r.sum(axis=1)
    if np.any(row_tot == 0):
        raise ValidationError(
            "a type has zero occurrence in every source; run preprocess()")
    lam_ij = r / row_tot[:, None] * y[:, None]
    n, m = r.shape
    return DutchResult(
        lambda_ij=lam_ij, lambda_j=lam_ij.sum(axis=0),
        sources=sources or [f"Source{j + 1}" for j in range(m)],
        types=types or [str(i + 1) for i in range(n)])


def dutch_bootstrap(data, n_bootstrap=1000, rng=None, ci_level=0.95,
                    resample_human=True, resample_source=True):
    """Bootstrap attribution over aggregated surveillance data.

    Counts are aggregated over times and locations; each replicate resamples
    the human case type composition (multinomially, probabilities y/sum(y))
    and each source's typed isolates (multinomially per source), then
    recomputes the attribution.  Percentile CIs at ``ci_level``.
    """
    if n_bootstrap < 1:
        raise ValidationError("need n_bootstrap >= 1")
    rng = np.random.default_rng(rng)
    y = data.y.sum(axis=(1, 2)).astype(float)
    x = data.x.sum(axis=2).astype(float)  # (n, m)
    point = dutch_attribute(y, _occurrence(x), sources=data.sources,
                            types=data.types)
    n, m = x.shape
    y_total = int(y.sum())
    reps = np.empty((n_bootstrap, m))
    for b in range(n_bootstrap):
        yb = rng.multinomial(y_total, y / y.sum()) if resample_human else y
        if resample_source:
            xb = np.empty_like(x)
            for j in range(m):
                tot = int(x[:, j].sum())
                xb[:, j] = rng.multinomial(tot, x[:, j] / max(tot, 1))
        else:
            xb = x
        occ = _occurrence(xb)
        keep = occ.sum(axis=1) > 0
        reps[b] = dutch_attribute(yb[keep], occ[keep]).lambda_j
    alpha = 1.0 - ci_level
    lo, hi = np.quantile(reps, [alpha / 2, 1 - alpha / 2], axis=0)
    point.ci_lower, point.ci_upper = lo, hi
    point.n_bootstrap = n_bootstrap
    return point


def _occurrence(x):
    """Column-normalized counts: relative occurrence of each type per source."""
    tot = x.sum(axis=0, keepdims=True)
    return np.divide(x, tot, out=np.zeros_like(x, dtype=float),
                     where=tot > 0)
