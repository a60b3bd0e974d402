"""Chain orchestration: initialization, the update cycle, storage, append.

One iteration updates every source-effect simplex, every relative-prevalence
simplex (unless fixed), then the type-effect clustering (assignment sweep
plus value redraw).  Burn-in counts raw iterations; thinning applies after
burn-in only, so a fit performs ``burn_in + n_iter * thin`` raw iterations.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import _kernels
from .data import Priors, ValidationError
from .model import ClusterState, ModelState, log_lik_human, log_lik_source

CHAIN_FORMAT_VERSION = 1
_MAGIC = b"SATTRCH1"

SAMPLE_PARAMS = ("alpha", "r", "q", "c", "n_clusters",
                 "lambda_i", "lambda_j", "lambda_j_prop")


class EngineError(RuntimeError):
    """Raised for numeric/model failures during a fit."""


@dataclass
class FitParams:
    """MCMC run lengths: stored samples, burn-in iterations, thinning."""

    n_iter: int = 1000
    burn_in: int = 0
    thin: int = 1
    seed: int = None

    def __post_init__(self):
        if self.n_iter < 1 or self.burn_in < 0 or self.thin < 1:
            raise ValidationError(
                "need n_iter >= 1, burn_in >= 0, thin >= 1")
        if self.seed is None:
            raise ValidationError("a seed is required for reproducible fits")

    @property
    def total_iterations(self):
        return self.burn_in + self.n_iter * self.thin


def model_digest(data, prevalence, priors, fixed_r):
    """Hash of everything that defines the posterior; guards append()."""
    h = hashlib.sha256()
    h.update(json.dumps({
        "types": data.types, "sources": data.sources, "times": data.times,
        "locations": data.locations, "priors": priors.to_dict(),
        "fixed_r": bool(fixed_r),
    }, sort_keys=True).encode())
    h.update(data.y.tobytes())
    h.update(data.x.tobytes())
    h.update(prevalence.k.tobytes())
    return h.hexdigest()


def init_state(data, prevalence, priors, rng, user_init=None, fixed_r=False):
    """Draw a starting state from the priors, honoring user overrides.

    Source effects and relative prevalences start at draws from their
    Dirichlet priors; all types start in one cluster whose value is drawn
    from the base distribution.  ``user_init`` may override any of
    ``alpha`` (T, L, m), ``r`` (m, T, n) or ``q`` (n,) after validation.
    """
    n, m, T, L = data.shape
    a_alpha = priors.alpha_vector(m)
    a_r = priors.r_vector(n)

    def draw_simplex(conc):
        w = rng.dirichlet(conc)
        while not np.all(w > 0):
            w = rng.dirichlet(conc)
        return w

    alpha = np.empty((T, L, m))
    for t in range(T):
        for l in range(L):
            alpha[t, l] = draw_simplex(a_alpha)
    r = np.empty((m, T, n))
    if fixed_r:
        r[:] = mle_relative_prevalence(data)
    else:
        for j in range(m):
            for t in range(T):
                r[j, t] = draw_simplex(a_r)
    theta0 = rng.gamma(priors.a_theta, 1.0 / priors.b_theta)
    while not theta0 > 1e-300:
        theta0 = rng.gamma(priors.a_theta, 1.0 / priors.b_theta)
    state = ModelState(alpha=alpha, r=r,
                       clusters=ClusterState.single_cluster(n, theta0))

    if user_init:
        unknown = set(user_init) - {"alpha", "r", "q"}
        if unknown:
            raise ValidationError(f"unknown init parameters: {sorted(unknown)}")
        if "alpha" in user_init:
            state.alpha = np.array(user_init["alpha"], dtype=float)
        if "r" in user_init:
            state.r = np.array(user_init["r"], dtype=float)
        if "q" in user_init:
            q = np.asarray(user_init["q"], dtype=float)
            if q.shape != (n,) or np.any(q <= 0):
                raise ValidationError("init q must be length n and positive")
            state.clusters = ClusterState.from_q(q)
        try:
            state.validate()
        except ValidationError as e:
            raise ValidationError(f"invalid user init: {e}") from e
    return state


def mle_relative_prevalence(data):
    """Maximum-likelihood relative prevalences x / column totals, (m, T, n)."""
    totals = data.x.sum(axis=0)  # (m, T)
    if np.any(totals == 0):
        j, t = (int(v[0]) for v in np.nonzero(totals == 0))
        raise ValidationError(
            f"source {data.sources[j]!r} has no typed positives at time "
            f"{data.times[t]!r}; cannot fix r at its MLE")
    return np.moveaxis(data.x / totals[None, :, :], 0, 2)


class Chain:
    """Stored thinned post-burn-in samples plus everything needed to resume.

    ``samples`` maps parameter names to arrays whose first axis indexes the
    stored sample: alpha (S,T,L,m), r (S,m,T,n), q (S,n), c (S,n),
    n_clusters (S,), lambda_i (S,n,T,L), lambda_j and lambda_j_prop
    (S,m,T,L).  ``meta`` carries labels, priors, fit parameters, the model
    digest and the exact resume state (raw parameter values, tuner scales and
    the generator state), so appends are bit-reproducible.
    """

    def __init__(self, samples, accept, resume, meta):
        self.samples = samples
        self.accept = accept
        self.resume = resume
        self.meta = meta

    @property
    def n_samples(self):
        return self.samples["q"].shape[0]

    @property
    def labels(self):
        return {k: self.meta[k] for k in
                ("types", "sources", "times", "locations")}

    # -- persistence -----------------------------------------------------

    def save(self, path):
        """Write the documented binary chain format (bit-exact round trip)."""
        arrays = {}
        for name, arr in self.samples.items():
            arrays[f"samples/{name}"] = arr
        for name, arr in self.accept.items():
            arrays[f"accept/{name}"] = arr
        for name, arr in self.resume["arrays"].items():
            arrays[f"resume/{name}"] = arr
        manifest = []
        offset = 0
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name])
            manifest.append({"name": name, "dtype": str(arr.dtype),
                             "shape": list(arr.shape), "offset": offset})
            arrays[name] = arr
            offset += arr.nbytes
        header = json.dumps({
            "format_version": CHAIN_FORMAT_VERSION,
            "meta": self.meta,
            "resume_scalars": self.resume["scalars"],
            "manifest": manifest,
        }, sort_keys=True).encode()
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(len(header).to_bytes(8, "little"))
            f.write(header)
            for name in sorted(arrays):
                f.write(arrays[name].tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            magic = f.read(8)
            if magic != _MAGIC:
                raise ValidationError(
                    f"{path}: not a chain file (bad magic {magic!r})")
            hlen = int.from_bytes(f.read(8), "little")
            header = json.loads(f.read(hlen).decode())
            if header.get("format_version") != CHAIN_FORMAT_VERSION:
                raise ValidationError(
                    f"{path}: unsupported chain format version "
                    f"{header.get('format_version')}")
            blob = f.read()
        samples, accept, resume_arrays = {}, {}, {}
        for entry in header["manifest"]:
            arr = np.frombuffer(blob, dtype=np.dtype(entry["dtype"]),
                                count=int(np.prod(entry["shape"], dtype=int)),
                                offset=entry["offset"])
            arr = arr.reshape(entry["shape"]).copy()
            group, name = entry["name"].split("/", 1)
            {"samples": samples, "accept": accept,
             "resume": resume_arrays}[group][name] = arr
        resume = {"arrays": resume_arrays,
                  "scalars": header["resume_scalars"]}
        return cls(samples, accept, resume, header["meta"])

    def to_csv(self, out_dir, params=None):
        """One long-format CSV per parameter; 17 significant digits."""
        from .io import write_chain_csvs
        return write_chain_csvs(self, out_dir, params=params)


class AttributionModel:
    """The assembled model: data, prevalences, priors and options."""

    def __init__(self, data, prevalence, priors=None, fixed_r=False,
                 init=None, random_scan=False):
        if prevalence.sources != data.sources:
            raise ValidationError("prevalence source labels do not match data")
        if prevalence.times != data.times:
            raise ValidationError("prevalence time labels do not match data")
        if np.any(data.x.sum(axis=(1, 2)) == 0):
            raise ValidationError(
                "data contains types with no source counts; run preprocess()")
        self.data = data
        self.prevalence = prevalence
        self.priors = priors if priors is not None else Priors()
        self.fixed_r = bool(fixed_r)
        self.init = init
        self.random_scan = bool(random_scan)
        self.digest = model_digest(data, prevalence, self.priors, self.fixed_r)

    def fit(self, fit_params):
        return run(self, fit_params)

    def append(self, chain, extra_n_iter):
        return append(self, chain, extra_n_iter)


class _Runner:
    """Mutable raw-state holder shared by run() and append()."""

    def __init__(self, model):
        data, prev = model.data, model.prevalence
        self.n, self.m, self.T, self.L = data.shape
        self.y = data.y
        self.x = data.x
        self.xsum = data.x.sum(axis=0)
        self.k = prev.k
        self.y_star = data.y.sum(axis=(1, 2))
        self.a_alpha = model.priors.alpha_vector(self.m)
        self.a_r = model.priors.r_vector(self.n)
        self.model = model

    def fresh(self, rng):
        model = self.model
        state = init_state(model.data, model.prevalence, model.priors, rng,
                           user_init=model.init, fixed_r=model.fixed_r)
        if not np.isfinite(log_lik_human(state, self.k, model.data)) or \
                not np.isfinite(log_lik_source(state, model.data)):
            raise EngineError(
                "non-finite log-likelihood at the initial state; check for "
                "zero intensities against positive counts (fixed_r with "
                "sparse sources is a common cause)")
        self.alpha = state.alpha
        self.r = state.r
        self.assignments = state.clusters.assignments
        self.theta = state.clusters.theta
        self.counts = state.clusters.counts
        self.sig_a = np.ones((self.T, self.L, self.m))
        self.wacc_a = np.zeros((self.T, self.L, self.m), dtype=np.int64)
        self.wprop_a = np.zeros_like(self.wacc_a)
        self.tacc_a = np.zeros_like(self.wacc_a)
        self.tprop_a = np.zeros_like(self.wacc_a)
        self.sig_r = np.ones((self.m, self.T, self.n))
        self.wacc_r = np.zeros((self.m, self.T, self.n), dtype=np.int64)
        self.wprop_r = np.zeros_like(self.wacc_r)
        self.tacc_r = np.zeros_like(self.wacc_r)
        self.tprop_r = np.zeros_like(self.wacc_r)
        self.z = 1

    def restore(self, chain):
        res = chain.resume["arrays"]
        for name in ("alpha", "r", "theta", "sig_a", "sig_r"):
            setattr(self, name, res[name].copy())
        for name in ("assignments", "counts", "wacc_a", "wprop_a", "tacc_a",
                     "tprop_a", "wacc_r", "wprop_r", "tacc_r", "tprop_r"):
            setattr(self, name, res[name].copy())
        self.z = int(chain.resume["scalars"]["z"])

    def advance(self, n_iters, rng):
        status = _kernels.run_block(
            n_iters, self.z, self.y, self.x, self.xsum, self.k,
            self.a_alpha, self.a_r,
            self.model.priors.a_theta, self.model.priors.b_theta,
            self.model.priors.a_q, self.y_star,
            self.alpha, self.r, self.assignments, self.theta, self.counts,
            self.sig_a, self.wacc_a, self.wprop_a, self.tacc_a, self.tprop_a,
            self.sig_r, self.wacc_r, self.wprop_r, self.tacc_r, self.tprop_r,
            self.model.fixed_r, self.model.random_scan, rng)
        if status == _kernels.STATUS_WEIGHT_UNDERFLOW:
            raise EngineError(
                "all cluster assignment weights underflowed; the model is "
                "numerically degenerate for this data/prior combination")
        self.z += n_iters

    def snapshot(self, store, s):
        """Write sample s of every stored parameter, including derived ones."""
        A = np.einsum("tlj,jti,jt->itl", self.alpha, self.r, self.k)
        q = self.theta[self.assignments]
        store["alpha"][s] = self.alpha
        store["r"][s] = self.r
        store["q"][s] = q
        store["c"][s] = self.assignments
        store["n_clusters"][s] = (self.counts > 0).sum()
        store["lambda_i"][s] = q[:, None, None] * A
        lam_j = np.einsum("tlj,jt,i,jti->jtl", self.alpha, self.k, q, self.r)
        store["lambda_j"][s] = lam_j
        store["lambda_j_prop"][s] = lam_j / lam_j.sum(axis=0, keepdims=True)

    def resume_payload(self, rng):
        return {
            "arrays": {
                "alpha": self.alpha.copy(), "r": self.r.copy(),
                "theta": self.theta.copy(),
                "assignments": self.assignments.copy(),
                "counts": self.counts.copy(),
                "sig_a": self.sig_a.copy(), "sig_r": self.sig_r.copy(),
                "wacc_a": self.wacc_a.copy(), "wprop_a": self.wprop_a.copy(),
                "tacc_a": self.tacc_a.copy(), "tprop_a": self.tprop_a.copy(),
                "wacc_r": self.wacc_r.copy(), "wprop_r": self.wprop_r.copy(),
                "tacc_r": self.tacc_r.copy(), "tprop_r": self.tprop_r.copy(),
            },
            "scalars": {"z": self.z,
                        "rng_state": rng.bit_generator.state},
        }

    def alloc(self, S):
        n, m, T, L = self.n, self.m, self.T, self.L
        return {
            "alpha": np.empty((S, T, L, m)),
            "r": np.empty((S, m, T, n)),
            "q": np.empty((S, n)),
            "c": np.empty((S, n), dtype=np.int64),
            "n_clusters": np.empty(S, dtype=np.int64),
            "lambda_i": np.empty((S, n, T, L)),
            "lambda_j": np.empty((S, m, T, L)),
            "lambda_j_prop": np.empty((S, m, T, L)),
        }


def run(model, fit_params):
    """Run a fresh chain.  (seed, data, priors, fit params) fix it exactly."""
    runner = _Runner(model)
    rng = np.random.default_rng(fit_params.seed)
    runner.fresh(rng)
    store = runner.alloc(fit_params.n_iter)
    collected = 0
    try:
        if fit_params.burn_in:
            runner.advance(fit_params.burn_in, rng)
        for s in range(fit_params.n_iter):
            runner.advance(fit_params.thin, rng)
            runner.snapshot(store, s)
            collected = s + 1
    except KeyboardInterrupt:
        if collected == 0:
            raise
        store = {k: v[:collected] for k, v in store.items()}
    meta = {
        "format_version": CHAIN_FORMAT_VERSION,
        "seed": fit_params.seed,
        "n_iter": collected,
        "burn_in": fit_params.burn_in,
        "thin": fit_params.thin,
        "priors": model.priors.to_dict(),
        "fixed_r": model.fixed_r,
        "random_scan": model.random_scan,
        "digest": model.digest,
        "types": model.data.types, "sources": model.data.sources,
        "times": model.data.times, "locations": model.data.locations,
    }
    accept = {"accept_alpha": runner.tacc_a, "propose_alpha": runner.tprop_a,
              "accept_r": runner.tacc_r, "propose_r": runner.tprop_r}
    return Chain(store, accept, runner.resume_payload(rng), meta)


def append(model, chain, extra_n_iter):
    """Continue a chain from its final raw state; no new burn-in."""
    if chain.meta["digest"] != model.digest:
        raise ValidationError(
            "chain was produced by a different model (digest mismatch)")
    runner = _Runner(model)
    runner.restore(chain)
    rng = np.random.default_rng()
    rng.bit_generator.state = chain.resume["scalars"]["rng_state"]
    store = runner.alloc(extra_n_iter)
    thin = chain.meta["thin"]
    for s in range(extra_n_iter):
        runner.advance(thin, rng)
        runner.snapshot(store, s)
    samples = {key: np.concatenate([chain.samples[key], store[key]])
               for key in chain.samples}
    meta = dict(chain.meta)
    meta["n_iter"] = meta["n_iter"] + extra_n_iter
    accept = {"accept_alpha": runner.tacc_a, "propose_alpha": runner.tprop_a,
              "accept_r": runner.tacc_r, "propose_r": runner.tprop_r}
    return Chain(samples, accept, runner.resume_payload(rng), meta)


def acceptance(chain):
    """Acceptance fraction per Metropolis-updated component, as a table.

    Covers every source-effect and relative-prevalence coordinate; the
    clustering parameters are Gibbs-updated and excluded.
    """
    meta = chain.meta
    rows = []
    ta, pa = chain.accept["accept_alpha"], chain.accept["propose_alpha"]
    for t, tl in enumerate(meta["times"]):
        for l, ll in enumerate(meta["locations"]):
            for j, sl in enumerate(meta["sources"]):
                rows.append(("alpha", "", sl, tl, ll,
                             ta[t, l, j] / max(pa[t, l, j], 1)))
    tr, pr = chain.accept["accept_r"], chain.accept["propose_r"]
    if not meta["fixed_r"]:
        for j, sl in enumerate(meta["sources"]):
            for t, tl in enumerate(meta["times"]):
                for i, yl in enumerate(meta["types"]):
                    rows.append(("r", yl, sl, tl, "",
                                 tr[j, t, i] / max(pr[j, t, i], 1)))
    return pd.DataFrame(rows, columns=["param", "type", "source", "time",
                                       "location", "acceptance_rate"])
