"""Model state and log-density algebra for the joint attribution model.

The mean number of human cases of type i from source j at time t, location l
factorises as

    lambda[i, j, t, l] = alpha[j, t, l] * q[i] * r[i, j, t] * k[j, t]

with source effects ``alpha`` (a simplex per time/location), type effects
``q`` shared within clusters, relative prevalences ``r`` (a simplex per
source/time) and fixed contamination prevalences ``k``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .data import ValidationError

SIMPLEX_TOL = 1e-9


@dataclass
class ClusterState:
    """Cluster bookkeeping for the type effects.

    ``assignments[i]`` is the cluster slot of type i; ``theta[h]`` the value
    shared by members of slot h; ``counts[h]`` the member count.  Slots with
    ``counts == 0`` are inactive and reusable.
    """

    assignments: np.ndarray  # (n,) int
    theta: np.ndarray        # (n,) float, valid where counts > 0
    counts: np.ndarray       # (n,) int

    @classmethod
    def single_cluster(cls, n, theta0):
        return cls(assignments=np.zeros(n, dtype=np.int64),
                   theta=np.concatenate([[theta0], np.zeros(n - 1)]),
                   counts=np.concatenate([[n], np.zeros(n - 1, dtype=np.int64)]))

    @classmethod
    def from_q(cls, q):
        """Rebuild the cluster structure implied by a type-effect vector."""
        q = np.asarray(q, dtype=float)
        values, assignments = np.unique(q, return_inverse=True)
        n = len(q)
        theta = np.zeros(n)
        counts = np.zeros(n, dtype=np.int64)
        theta[:len(values)] = values
        counts[:len(values)] = np.bincount(assignments, minlength=len(values))
        return cls(assignments=assignments.astype(np.int64), theta=theta,
                   counts=counts)

    @property
    def active(self):
        return np.flatnonzero(self.counts > 0)

    @property
    def n_clusters(self):
        return int((self.counts > 0).sum())

    @property
    def q(self):
        return self.theta[self.assignments]

    def copy(self):
        return ClusterState(self.assignments.copy(), self.theta.copy(),
                            self.counts.copy())

    def validate(self):
        n = len(self.assignments)
        if self.counts.sum() != n:
            raise ValidationError("cluster member counts do not sum to n")
        if np.any(self.counts[self.assignments] <= 0):
            raise ValidationError("assignment points at an inactive cluster")
        recount = np.bincount(self.assignments, minlength=n)
        if not np.array_equal(recount, self.counts):
            raise ValidationError("cluster counts inconsistent with assignments")
        if np.any(self.theta[self.active] <= 0):
            raise ValidationError("cluster values must be strictly positive")


@dataclass
class ModelState:
    """One MCMC state: source effects, relative prevalences and clusters."""

    alpha: np.ndarray  # (T, L, m), each [t, l, :] on the simplex
    r: np.ndarray      # (m, T, n), each [j, t, :] on the simplex
    clusters: ClusterState

    @property
    def q(self):
        return self.clusters.q

    @property
    def assignments(self):
        return self.clusters.assignments

    def copy(self):
        return ModelState(self.alpha.copy(), self.r.copy(),
                          self.clusters.copy())

    def validate(self):
        if np.any(self.alpha < 0) or np.any(self.r < 0):
            raise ValidationError("alpha and r must be nonnegative")
        if np.any(np.abs(self.alpha.sum(axis=2) - 1.0) > SIMPLEX_TOL):
            raise ValidationError("an alpha vector does not sum to 1")
        if np.any(np.abs(self.r.sum(axis=2) - 1.0) > SIMPLEX_TOL):
            raise ValidationError("an r vector does not sum to 1")
        self.clusters.validate()


def lambda_ij(state, k):
    """Per (type, source, time, location) case intensity, shape (n, m, T, L).

    Marginal sums give ``lambda_i = lam.sum(axis=1)`` (the Poisson mean of y)
    and ``lambda_j = lam.sum(axis=0)``.
    """
    q = state.q
    # [i,j,t,l] = alpha[t,l,j] * q[i] * r[j,t,i] * k[j,t]
    return np.einsum("tlj,i,jti,jt->ijtl", state.alpha, q, state.r, k)


def lambda_i(state, k):
    return lambda_ij(state, k).sum(axis=1)


def lambda_j(state, k):
    return lambda_ij(state, k).sum(axis=0)


def lambda_j_prop(lam_j):
    """Normalize lambda_j to per (time, location) source proportions."""
    totals = lam_j.sum(axis=0, keepdims=True)
    if np.any(totals <= 0):
        raise ValidationError("lambda_j sums to zero for some (time, location)")
    return lam_j / totals


def log_lik_human(state, k, data):
    """Poisson log-likelihood of the human case counts.

    Returns ``-inf`` when an intensity is zero but its count is positive, so
    degenerate Metropolis proposals are rejected rather than raising.
    """
    lam = lambda_i(state, k)
    y = data.y
    if np.any(lam[y > 0] == 0):
        return -np.inf
    out = -lam.sum() - gammaln(y + 1.0).sum()
    pos = y > 0
    out += (y[pos] * np.log(lam[pos])).sum()
    return float(out)


def log_lik_source(state, data, include_constant=False):
    """Multinomial log-likelihood of the typed source counts.

    The combinatorial normalizing term does not involve ``r`` and is dropped
    by default, so reported values are unnormalized log-likelihoods; pass
    ``include_constant=True`` for the full log-pmf.  Uses 0 * log(0) = 0.
    """
    x = data.x  # (n, m, T)
    r = np.moveaxis(state.r, 2, 0)  # (n, m, T)
    if np.any(r[x > 0] == 0):
        return -np.inf
    pos = x > 0
    out = (x[pos] * np.log(r[pos])).sum()
    if include_constant:
        totals = x.sum(axis=0)
        out += gammaln(totals + 1.0).sum() - gammaln(x + 1.0).sum()
    return float(out)


def log_prior_dirichlet(w, concentration, include_constant=True):
    """Dirichlet log-density of a simplex vector.

    ``concentration`` may be a scalar (symmetric prior) or a vector.  A zero
    component with concentration != 1 yields ``-inf`` (rejection sentinel).
    """
    w = np.asarray(w, dtype=float)
    a = np.broadcast_to(np.asarray(concentration, dtype=float), w.shape)
    if np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise ValidationError("w is not on the simplex")
    zero = w == 0
    if np.any(zero):
        if np.any(a[zero] != 1.0):
            return -np.inf
    out = ((a - 1.0) * np.log(np.where(zero, 1.0, w))).sum()
    if include_constant:
        out += gammaln(a.sum()) - gammaln(a).sum()
    return float(out)
