"""Compiled MCMC inner loops.

The fitting engine spends essentially all its time here: one call advances
the chain by a block of iterations, mutating the state, tuner and acceptance
arrays in place.  The math mirrors the reference kernels in ``samplers``
(same proposal scheme, Hastings correction and cluster conditionals), but is
specialized to the joint model so the per-proposal conditional densities can
be evaluated incrementally.

The per-(time, location) array ``A[i, t, l] = sum_j alpha[t,l,j] *
r[j,t,i] * k[j,t]`` (the case intensity with the type effect divided out) is
maintained across proposals and recomputed fresh at the start of every
iteration to stop floating-point drift from accumulating.
"""

import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_WEIGHT_UNDERFLOW = 1

_ADDITIVE_PROB = 0.05
_ADDITIVE_SD = 0.1
_ACCEPT_TARGET = 0.44
_ADAPT_WINDOW = 50


@njit(cache=True)
def _propose(wj, sigma_j, wsum, rng):
    """Draw one component proposal.  Returns (vj, s, log_hastings_base, kind).

    kind 0 = multiplicative (log_hastings_base = eps), 1 = additive
    (log_hastings_base = eta), -1 = invalid.  The dimension-dependent part of
    the Hastings factor is added by the caller.
    """
    if rng.random() > _ADDITIVE_PROB:
        eps = rng.normal(0.0, sigma_j)
        vj = wj * math.exp(eps)
        kind = 0
        base = eps
    else:
        eta = rng.normal(0.0, _ADDITIVE_SD)
        vj = wj + eta
        kind = 1
        base = eta
    if not (vj > 0.0 and math.isfinite(vj)):
        return 0.0, 0.0, 0.0, -1
    s = wsum - wj + vj
    if not (s > 0.0 and math.isfinite(s)):
        return 0.0, 0.0, 0.0, -1
    return vj, s, base, kind


@njit(cache=True)
def _log_hastings(base, kind, s, d):
    if kind == 0:
        return base - d * math.log(s)
    eta_rev = -base / s
    return (base * base - eta_rev * eta_rev) / (2.0 * _ADDITIVE_SD ** 2) \
        - (d + 1) * math.log(s)


@njit(cache=True)
def _adapt(sigma, wacc, wprop, idx, accepted, z):
    wprop[idx] += 1
    if accepted:
        wacc[idx] += 1
    if wprop[idx] >= _ADAPT_WINDOW:
        rho = wacc[idx] / wprop[idx]
        step = min(0.05, 1.0 / math.sqrt(z))
        if rho > _ACCEPT_TARGET:
            sigma[idx] *= math.exp(step)
        else:
            sigma[idx] *= math.exp(-step)
        wacc[idx] = 0
        wprop[idx] = 0


@njit(cache=True)
def _recompute_A(alpha, r, k, A):
    n, T, L = A.shape
    m = r.shape[0]
    for i in range(n):
        for t in range(T):
            for l in range(L):
                acc = 0.0
                for j in range(m):
                    acc += alpha[t, l, j] * r[j, t, i] * k[j, t]
                A[i, t, l] = acc


@njit(cache=True)
def _update_alpha_block(t, l, alpha, r, k, A, qvec, y, a_alpha, asum_alpha,
                        sig, wacc, wprop, tacc, tprop, z, rng):
    n = A.shape[0]
    m = alpha.shape[2]
    w = alpha[t, l]
    for j in range(m):
        tprop[t, l, j] += 1
        vj, s, base, kind = _propose(w[j], sig[t, l, j], 1.0, rng)
        accepted = False
        if kind >= 0 and vj / s > 0.0:
            ok = True
            for jj in range(m):
                if jj != j and w[jj] / s <= 0.0:
                    ok = False
                    break
            if ok:
                delta = (vj - w[j]) * k[j, t]
                ll = 0.0
                for i in range(n):
                    Ai = A[i, t, l]
                    Ain = (Ai + delta * r[j, t, i]) / s
                    ll += -qvec[i] * (Ain - Ai)
                    yi = y[i, t, l]
                    if yi > 0:
                        if Ain <= 0.0:
                            ll = -np.inf
                            break
                        ll += yi * (math.log(Ain) - math.log(Ai))
                if ll > -np.inf:
                    prior = (a_alpha[j] - 1.0) * (math.log(vj) - math.log(w[j])) \
                        - (asum_alpha - m) * math.log(s)
                    log_h = _log_hastings(base, kind, s, m)
                    if math.log(rng.random()) < ll + prior + log_h:
                        accepted = True
                        for i in range(n):
                            A[i, t, l] = (A[i, t, l]
                                          + delta * r[j, t, i]) / s
                        tot = 0.0
                        for jj in range(m):
                            w[jj] = w[jj] / s
                        w[j] = vj / s
                        for jj in range(m):
                            tot += w[jj]
                        for jj in range(m):
                            w[jj] /= tot
        if accepted:
            tacc[t, l, j] += 1
        _adapt(sig[t, l], wacc[t, l], wprop[t, l], j, accepted, z)


@njit(cache=True)
def _update_r_block(j, t, alpha, r, k, A, qvec, y, x, xsum, a_r, asum_r,
                    sig, wacc, wprop, tacc, tprop, z, rng):
    n, _, L = A.shape
    w = r[j, t]
    for c in range(n):
        tprop[j, t, c] += 1
        vc, s, base, kind = _propose(w[c], sig[j, t, c], 1.0, rng)
        accepted = False
        if kind >= 0 and vc / s > 0.0:
            f = 1.0 / s
            ok = True
            for ii in range(n):
                if ii != c and w[ii] * f <= 0.0:
                    ok = False
                    break
            if ok:
                ll = 0.0
                for l in range(L):
                    aa = alpha[t, l, j] * k[j, t]
                    for i in range(n):
                        wi_new = vc * f if i == c else w[i] * f
                        Ai = A[i, t, l]
                        Ain = Ai + aa * (wi_new - w[i])
                        ll += -qvec[i] * (Ain - Ai)
                        yi = y[i, t, l]
                        if yi > 0:
                            if Ain <= 0.0:
                                ll = -np.inf
                                break
                            ll += yi * (math.log(Ain) - math.log(Ai))
                    if ll == -np.inf:
                        break
                if ll > -np.inf:
                    dl = math.log(vc) - math.log(w[c])
                    src = x[c, j, t] * dl - xsum[j, t] * math.log(s)
                    prior = (a_r[c] - 1.0) * dl - (asum_r - n) * math.log(s)
                    log_h = _log_hastings(base, kind, s, n)
                    if math.log(rng.random()) < ll + src + prior + log_h:
                        accepted = True
                        for l in range(L):
                            aa = alpha[t, l, j] * k[j, t]
                            for i in range(n):
                                wi_new = vc * f if i == c else w[i] * f
                                A[i, t, l] += aa * (wi_new - w[i])
                        tot = 0.0
                        for ii in range(n):
                            w[ii] = w[ii] * f
                        w[c] = vc * f
                        for ii in range(n):
                            tot += w[ii]
                        for ii in range(n):
                            w[ii] /= tot
        if accepted:
            tacc[j, t, c] += 1
        _adapt(sig[j, t], wacc[j, t], wprop[j, t], c, accepted, z)


@njit(cache=True)
def _crp_sweep(A, y_star, assignments, theta, counts, a_theta, b_theta, a_q,
               random_scan, rng, logw, order):
    """One assignment sweep plus the cluster value redraw.  Returns status."""
    n, T, L = A.shape
    for i in range(n):
        order[i] = i
    if random_scan:
        for i in range(n - 1, 0, -1):
            jj = rng.integers(0, i + 1)
            tmp = order[i]
            order[i] = order[jj]
            order[jj] = tmp
    lg_a = math.lgamma(a_theta)
    for oi in range(n):
        i = order[oi]
        counts[assignments[i]] -= 1
        ys = float(y_star[i])
        ls = 0.0
        for t in range(T):
            for l in range(L):
                ls += A[i, t, l]
        n_active = 0
        mx = -np.inf
        for h in range(n):
            if counts[h] > 0:
                lw = math.log(counts[h]) + ys * math.log(theta[h]) \
                    - theta[h] * ls
                logw[n_active] = lw
                logw[n + n_active] = h  # stash the cluster id alongside
                if lw > mx:
                    mx = lw
                n_active += 1
        lw_new = math.log(a_q) + a_theta * math.log(b_theta) \
            + math.lgamma(a_theta + ys) - lg_a \
            - (a_theta + ys) * math.log(b_theta + ls)
        if lw_new > mx:
            mx = lw_new
        if not math.isfinite(mx):
            return STATUS_WEIGHT_UNDERFLOW
        total = 0.0
        for idx in range(n_active):
            total += math.exp(logw[idx] - mx)
        total += math.exp(lw_new - mx)
        u = rng.random() * total
        acc = 0.0
        pick = -1
        for idx in range(n_active):
            acc += math.exp(logw[idx] - mx)
            if u <= acc:
                pick = int(logw[n + idx])
                break
        if pick < 0:
            # new cluster: first free slot
            for h in range(n):
                if counts[h] == 0:
                    pick = h
                    break
            theta[pick] = rng.gamma(a_theta + ys, 1.0 / (b_theta + ls))
        assignments[i] = pick
        counts[pick] += 1
    # conjugate redraw of every active cluster value
    for h in range(n):
        if counts[h] > 0:
            ysum = 0.0
            lsum = 0.0
            for i in range(n):
                if assignments[i] == h:
                    ysum += y_star[i]
                    ls_i = 0.0
                    for t in range(T):
                        for l in range(L):
                            ls_i += A[i, t, l]
                    lsum += ls_i
            theta[h] = rng.gamma(a_theta + ysum, 1.0 / (b_theta + lsum))
    return STATUS_OK


@njit(cache=True)
def run_block(n_iters, z_start, y, x, xsum, k, a_alpha, a_r, a_theta, b_theta,
              a_q, y_star, alpha, r, assignments, theta, counts,
              sig_a, wacc_a, wprop_a, tacc_a, tprop_a,
              sig_r, wacc_r, wprop_r, tacc_r, tprop_r,
              fixed_r, random_scan, rng):
    """Advance the chain by ``n_iters`` full iterations.  Returns status."""
    n, T, L = y.shape
    m = alpha.shape[2]
    A = np.empty((n, T, L))
    qvec = np.empty(n)
    logw = np.empty(2 * n)
    order = np.empty(n, dtype=np.int64)
    asum_alpha = a_alpha.sum()
    asum_r = a_r.sum()
    for it in range(n_iters):
        z = z_start + it
        _recompute_A(alpha, r, k, A)
        for i in range(n):
            qvec[i] = theta[assignments[i]]
        for t in range(T):
            for l in range(L):
                _update_alpha_block(t, l, alpha, r, k, A, qvec, y, a_alpha,
                                    asum_alpha, sig_a, wacc_a, wprop_a,
                                    tacc_a, tprop_a, z, rng)
        if not fixed_r:
            for j in range(m):
                for t in range(T):
                    _update_r_block(j, t, alpha, r, k, A, qvec, y, x, xsum,
                                    a_r, asum_r, sig_r, wacc_r, wprop_r,
                                    tacc_r, tprop_r, z, rng)
        status = _crp_sweep(A, y_star, assignments, theta, counts, a_theta,
                            b_theta, a_q, random_scan, rng, logw, order)
        if status != STATUS_OK:
            return status
    return STATUS_OK
