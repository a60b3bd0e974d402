"""MCMC kernels: adaptive simplex random walk and marginal cluster Gibbs.

These are the reference (pure Python) implementations of the two transition
kernels.  The fitting engine runs compiled equivalents (see ``_kernels``);
the versions here take arbitrary target densities and are the ones exercised
by the statistical correctness tests.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .data import ValidationError

ADDITIVE_PROB = 0.05      # fraction of proposals using the additive step
ADDITIVE_SD = 0.1
ACCEPT_TARGET = 0.44
ADAPT_WINDOW = 50


@dataclass
class AdaptiveTuner:
    """Per-component proposal scales with windowed acceptance tracking.

    ``z`` is the global iteration counter used to damp the adaptation; the
    caller advances it once per sweep.  Scales are multiplied by
    ``exp(+-min(0.05, 1/sqrt(z)))`` every ``ADAPT_WINDOW`` proposals of a
    component, upward when its windowed acceptance rate exceeds 0.44.
    """

    sigma: np.ndarray
    window_accept: np.ndarray = None
    window_propose: np.ndarray = None
    z: int = 1

    @classmethod
    def for_dimension(cls, d, sigma0=1.0):
        return cls(sigma=np.full(d, float(sigma0)))

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.window_accept is None:
            self.window_accept = np.zeros(len(self.sigma), dtype=np.int64)
        if self.window_propose is None:
            self.window_propose = np.zeros(len(self.sigma), dtype=np.int64)

    def record(self, j, accepted):
        self.window_propose[j] += 1
        if accepted:
            self.window_accept[j] += 1
        if self.window_propose[j] >= ADAPT_WINDOW:
            rho = self.window_accept[j] / self.window_propose[j]
            step = min(0.05, 1.0 / math.sqrt(self.z))
            self.sigma[j] *= math.exp(step if rho > ACCEPT_TARGET else -step)
            self.window_accept[j] = 0
            self.window_propose[j] = 0


def propose_simplex_component(w, j, sigma_j, rng):
    """One constrained random-walk proposal on simplex component j.

    With probability 0.95 the component moves multiplicatively,
    ``w_j * exp(N(0, sigma_j))``, otherwise additively, ``N(w_j, 0.1)``; the
    vector is then renormalized to unit L1 norm.  Returns
    ``(w_new, log_hastings)`` or ``(None, -inf)`` for an invalid proposal.

    The log Hastings term includes the full change of variables of the
    renormalization map (``d`` the dimension, ``s`` the post-proposal L1
    norm): ``eps - d*log(s)`` for the multiplicative move and
    ``log N(eta'|0,0.1) - log N(eta|0,0.1) - (d+1)*log(s)`` with reverse
    increment ``eta' = -eta/s`` for the additive one.  Without these factors
    the walk does not leave the Dirichlet target invariant.
    """
    d = len(w)
    wj = w[j]
    if rng.random() > ADDITIVE_PROB:
        eps = rng.normal(0.0, sigma_j)
        vj = wj * math.exp(eps)
        base = eps
        additive = False
    else:
        eta = rng.normal(0.0, ADDITIVE_SD)
        vj = wj + eta
        additive = True
    if not (vj > 0.0 and math.isfinite(vj)):
        return None, -np.inf
    s = w.sum() - wj + vj
    if not (s > 0.0 and math.isfinite(s)):
        return None, -np.inf
    w_new = w / s
    w_new[j] = vj / s
    w_new /= w_new.sum()
    if not np.all(w_new > 0.0):
        return None, -np.inf
    if additive:
        eta = vj - wj
        eta_rev = -eta / s
        log_h = (eta * eta - eta_rev * eta_rev) / (2.0 * ADDITIVE_SD ** 2) \
            - (d + 1) * math.log(s)
    else:
        log_h = base - d * math.log(s)
    return w_new, log_h


def _log_dirichlet_kernel(w, a):
    # unnormalized; components assumed strictly positive
    return float(((a - 1.0) * np.log(w)).sum())


def update_dirichlet_vector(w, concentration, tuner, target_logdensity, rng,
                            num_proposals=None):
    """Metropolis-within-Gibbs sweep over a Dirichlet-distributed vector.

    Performs ``num_proposals`` single-component proposals (default: one per
    component, in index order), accepting each with probability
    ``1 ^ prior_ratio * likelihood_ratio * hastings``.  ``target_logdensity``
    supplies the log-likelihood (may return -inf); the Dirichlet prior with
    the given concentration is handled internally.  Returns the updated
    vector; the tuner is updated in place.
    """
    w = np.asarray(w, dtype=float).copy()
    d = len(w)
    a = np.broadcast_to(np.asarray(concentration, dtype=float), (d,))
    if num_proposals is None:
        num_proposals = d
    log_target = target_logdensity(w)
    log_prior = _log_dirichlet_kernel(w, a)
    for p in range(num_proposals):
        j = p % d
        w_new, log_h = propose_simplex_component(w, j, tuner.sigma[j], rng)
        if w_new is None:
            tuner.record(j, False)
            continue
        new_target = target_logdensity(w_new)
        new_prior = _log_dirichlet_kernel(w_new, a)
        log_ratio = (new_prior - log_prior) + (new_target - log_target) + log_h
        accepted = math.log(rng.random()) < log_ratio
        if accepted:
            w, log_target, log_prior = w_new, new_target, new_prior
        tuner.record(j, accepted)
    return w


@dataclass
class ClusterSufficientStats:
    """Per-type totals entering the cluster conditionals.

    ``y_star[i]`` is the type's human case total over times and locations;
    ``lambda_star[i]`` the matching intensity total with the type effect
    divided out, ``sum_{t,l} alpha[t,l,:] . (r[:,t,i] * k[:,t])``.
    """

    y_star: np.ndarray
    lambda_star: np.ndarray

    def __post_init__(self):
        self.y_star = np.asarray(self.y_star, dtype=np.int64)
        self.lambda_star = np.asarray(self.lambda_star, dtype=float)
        if np.any(self.y_star < 0):
            raise ValidationError("y_star must be nonnegative")
        if np.any(self.lambda_star <= 0):
            raise ValidationError("lambda_star must be strictly positive")

    @classmethod
    def from_state(cls, state, k, data):
        lam = np.einsum("tlj,jti,jt->itl", state.alpha, state.r, k)
        return cls(y_star=data.y.sum(axis=(1, 2)),
                   lambda_star=lam.sum(axis=(1, 2)))


def log_marginal_new_cluster_weight(y_star, lambda_star, priors):
    """Log weight of opening a new cluster in the assignment conditional.

    Equals ``log`` of the concentration times the Poisson-Gamma marginal
    likelihood of the type's totals, with the factor
    ``lambda_star**y_star / y_star!`` dropped (it is common to all assignment
    options and cancels in the normalization):

        a_q * b^a * Gamma(a + y*) / (Gamma(a) * (b + lambda*)**(a + y*))
    """
    a, b = priors.a_theta, priors.b_theta
    return (math.log(priors.a_q) + a * math.log(b)
            + gammaln(a + y_star) - gammaln(a)
            - (a + y_star) * math.log(b + lambda_star))


def marginal_new_cluster_weight(y_star, lambda_star, priors):
    return math.exp(log_marginal_new_cluster_weight(y_star, lambda_star,
                                                    priors))


def _sample_categorical(log_weights, rng):
    log_weights = np.asarray(log_weights, dtype=float)
    mx = log_weights.max()
    if not np.isfinite(mx):
        raise FloatingPointError(
            "all cluster assignment weights underflowed to -inf")
    w = np.exp(log_weights - mx)
    return int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(),
                               side="right"))


def crp_update_assignments(stats, priors, clusters, rng, order=None):
    """One Gibbs sweep over the cluster assignments.

    Each type is removed from its cluster (deleting it if emptied) and
    reassigned: an existing cluster h gets weight
    ``n_h * theta_h**y* * exp(-theta_h * lambda*)`` and a new cluster the
    marginal weight of ``log_marginal_new_cluster_weight`` (the common factor
    ``lambda***y* / y*!`` is dropped from both).  A newly opened cluster
    draws its value from the conjugate posterior
    ``Gamma(a + y*, b + lambda*)``.  Weights are normalized in log space.
    """
    n = len(clusters.assignments)
    if order is None:
        order = range(n)
    for i in order:
        h_old = clusters.assignments[i]
        clusters.counts[h_old] -= 1
        ys = stats.y_star[i]
        ls = stats.lambda_star[i]
        active = np.flatnonzero(clusters.counts > 0)
        logw = np.empty(len(active) + 1)
        for idx, h in enumerate(active):
            th = clusters.theta[h]
            logw[idx] = (math.log(clusters.counts[h])
                         + ys * math.log(th) - th * ls)
        logw[-1] = log_marginal_new_cluster_weight(ys, ls, priors)
        choice = _sample_categorical(logw, rng)
        if choice == len(active):
            h_new = int(np.flatnonzero(clusters.counts == 0)[0])
            clusters.theta[h_new] = rng.gamma(priors.a_theta + ys,
                                              1.0 / (priors.b_theta + ls))
        else:
            h_new = int(active[choice])
        clusters.assignments[i] = h_new
        clusters.counts[h_new] += 1
    return clusters


def update_cluster_values(stats, priors, clusters, rng):
    """Redraw every active cluster value from its conjugate conditional.

    ``theta_h ~ Gamma(a + sum y*_members, rate = b + sum lambda*_members)``.
    """
    for h in clusters.active:
        members = clusters.assignments == h
        shape = priors.a_theta + stats.y_star[members].sum()
        rate = priors.b_theta + stats.lambda_star[members].sum()
        clusters.theta[h] = rng.gamma(shape, 1.0 / rate)
    return clusters
