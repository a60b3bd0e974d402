"""Input data containers, validation and preprocessing.

Counts are stored densely: a (type, time, location) or (type, source, time)
combination that was never observed is a zero count, not a missing cell.
"""

from dataclasses import dataclass, field

import numpy as np


class ValidationError(ValueError):
    """Raised when input data or configuration violates a model invariant."""


@dataclass
class SurveillanceData:
    """Human case counts and typed positive source-sample counts.

    Attributes
    ----------
    types, sources, times, locations : list of str
        Ordered index labels. ``n = len(types)``, ``m = len(sources)``.
    y : ndarray, shape (n, T, L), int
        Human cases per (type, time, location).
    x : ndarray, shape (n, m, T), int
        Typed positive source samples per (type, source, time).  Source
        sampling is not location resolved; counts apply to every location
        within a time period.
    """

    types: list
    sources: list
    times: list
    locations: list
    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        self.types = [str(t) for t in self.types]
        self.sources = [str(s) for s in self.sources]
        self.times = [str(t) for t in self.times]
        self.locations = [str(l) for l in self.locations]
        self.y = np.asarray(self.y)
        self.x = np.asarray(self.x)
        self.validate()

    @property
    def n_types(self):
        return len(self.types)

    @property
    def n_sources(self):
        return len(self.sources)

    @property
    def shape(self):
        return (len(self.types), len(self.sources), len(self.times),
                len(self.locations))

    def validate(self):
        n, m, T, L = self.shape
        for name, labels in (("types", self.types), ("sources", self.sources),
                             ("times", self.times),
                             ("locations", self.locations)):
            if len(labels) == 0:
                raise ValidationError(f"empty index set: {name}")
            if len(set(labels)) != len(labels):
                raise ValidationError(f"duplicate labels in {name}")
        if self.y.shape != (n, T, L):
            raise ValidationError(
                f"y has shape {self.y.shape}, expected {(n, T, L)}")
        if self.x.shape != (n, m, T):
            raise ValidationError(
                f"x has shape {self.x.shape}, expected {(n, m, T)}")
        for name, arr in (("y", self.y), ("x", self.x)):
            if not np.issubdtype(arr.dtype, np.integer):
                if not np.all(arr == np.floor(arr)):
                    raise ValidationError(f"{name} contains non-integer counts")
            if np.any(arr < 0):
                idx = tuple(int(v[0]) for v in np.nonzero(arr < 0))
                raise ValidationError(f"negative count in {name} at {idx}")
        self.y = self.y.astype(np.int64)
        self.x = self.x.astype(np.int64)

    def subset_types(self, keep_idx):
        return SurveillanceData(
            types=[self.types[i] for i in keep_idx],
            sources=self.sources, times=self.times, locations=self.locations,
            y=self.y[keep_idx], x=self.x[keep_idx])


@dataclass
class SourcePrevalence:
    """Per (source, time) contamination prevalence with its sample counts.

    ``k[j, t]`` is the fraction of samples from source j at time t that were
    pathogen positive.  Positives that could not be typed still count towards
    the prevalence; they simply do not appear in ``SurveillanceData.x``.
    """

    sources: list
    times: list
    k: np.ndarray  # (m, T) in [0, 1]
    total_samples: np.ndarray = None  # (m, T) or None if k given directly
    positive_samples: np.ndarray = None

    def __post_init__(self):
        self.sources = [str(s) for s in self.sources]
        self.times = [str(t) for t in self.times]
        self.k = np.asarray(self.k, dtype=float)
        m, T = len(self.sources), len(self.times)
        if self.k.shape != (m, T):
            raise ValidationError(
                f"k has shape {self.k.shape}, expected {(m, T)}")
        if np.any(self.k < 0) or np.any(self.k > 1):
            raise ValidationError("prevalence values must lie in [0, 1]")


def empirical_prevalence(totals, positives, sources=None, times=None):
    """Empirical prevalence estimates ``k = positives / totals``.

    Parameters
    ----------
    totals, positives : array_like, shape (m,) or (m, T)
        Total and pathogen-positive sample counts per source (and time).
    """
    totals = np.atleast_2d(np.asarray(totals, dtype=float).T).T
    positives = np.atleast_2d(np.asarray(positives, dtype=float).T).T
    if totals.shape != positives.shape:
        raise ValidationError("totals and positives have different shapes")
    if np.any(totals <= 0):
        raise ValidationError("total sample counts must be positive")
    if np.any(positives < 0) or np.any(positives > totals):
        raise ValidationError("need 0 <= positives <= totals")
    m, T = totals.shape
    if sources is None:
        sources = [f"Source{j + 1}" for j in range(m)]
    if times is None:
        times = [str(t + 1) for t in range(T)]
    return SourcePrevalence(sources=sources, times=times,
                            k=positives / totals,
                            total_samples=totals.astype(np.int64),
                            positive_samples=positives.astype(np.int64))


@dataclass
class Priors:
    """Hyperparameters of the joint model.

    ``a_alpha`` and ``a_r`` are symmetric Dirichlet concentrations when
    scalar; a full positive vector gives a non-symmetric prior.  ``a_theta``
    and ``b_theta`` are the shape and *rate* of the Gamma base distribution
    for the type-effect clusters, and ``a_q`` the clustering concentration.
    """

    a_theta: float = 0.01
    b_theta: float = 1e-5
    a_alpha: object = 1.0
    a_r: object = 0.1
    a_q: float = 0.1

    def __post_init__(self):
        for name in ("a_theta", "b_theta", "a_q"):
            v = float(getattr(self, name))
            if not v > 0:
                raise ValidationError(f"prior {name} must be > 0, got {v}")
            setattr(self, name, v)
        for name in ("a_alpha", "a_r"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim == 0:
                if not v > 0:
                    raise ValidationError(f"prior {name} must be > 0")
                setattr(self, name, float(v))
            else:
                if v.ndim != 1 or np.any(v < 0) or v.sum() <= 0:
                    raise ValidationError(
                        f"vector prior {name} must be nonnegative, nonzero")
                setattr(self, name, v)

    def alpha_vector(self, m):
        a = np.asarray(self.a_alpha, dtype=float)
        return np.full(m, float(a)) if a.ndim == 0 else _check_len(a, m, "a_alpha")

    def r_vector(self, n):
        a = np.asarray(self.a_r, dtype=float)
        return np.full(n, float(a)) if a.ndim == 0 else _check_len(a, n, "a_r")

    def to_dict(self):
        as_list = lambda v: v.tolist() if isinstance(v, np.ndarray) else v
        return {"a_theta": self.a_theta, "b_theta": self.b_theta,
                "a_alpha": as_list(self.a_alpha), "a_r": as_list(self.a_r),
                "a_q": self.a_q}


def _check_len(a, d, name):
    if len(a) != d:
        raise ValidationError(f"vector prior {name} has length {len(a)}, expected {d}")
    return a.copy()


def preprocess(raw):
    """Drop types never observed in any source sample.

    A type with ``sum_{j,t} x[i,j,t] == 0`` carries no source signal and its
    relative prevalence row would be unidentifiable.  Returns the reduced
    dataset and the list of removed type labels.  Type order is preserved.
    """
    totals = raw.x.sum(axis=(1, 2))
    keep = np.flatnonzero(totals > 0)
    removed = [raw.types[i] for i in np.flatnonzero(totals == 0)]
    if len(keep) == 0:
        raise ValidationError("all types have zero source counts: empty model")
    if len(removed) == 0:
        return raw, removed
    return raw.subset_types(keep), removed
