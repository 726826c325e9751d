"""Metropolis-within-Gibbs chain, JIT-compiled.

The chain state lives in flat arrays and every update recomputes only the
log-density terms its block touches, maintaining a running total that is
reconciled against a from-scratch evaluation when the chain finishes (and,
one layer up, against the pure-Python density in model.py).  Proposals that
land outside a support bound are rejected, never clamped.

Blocking: each study curve and each subgroup curve moves as a joint
(intercept, log-slope) pair, each mean vector as a joint pair, every
variance/correlation/translation scalar on its own, and the latent component
indicators by exact categorical Gibbs draws.  Random-walk scales adapt by
Robbins-Monro during burn-in only.
"""

import math

import numpy as np
from numba import njit

from .types import CORRELATION_BOUNDS, INTERCEPT_BOUNDS, LOG_SLOPE_BOUNDS, SD_FLOOR

LOG_2PI = math.log(2.0 * math.pi)
I_LO, I_HI = INTERCEPT_BOUNDS
S_LO, S_HI = LOG_SLOPE_BOUNDS
C_LO, C_HI = CORRELATION_BOUNDS

# update-mask slots; the packing layer maps block-group names onto these
(
    G_STUDY,
    G_SPECIES_MEAN,
    G_GRAND,
    G_HUMAN_MEAN,
    G_CURVE,
    G_COMPONENT,
    G_CONVERSION,
    G_BRIDGING,
    G_STUDY_COV,
    G_SPECIES_COV,
    G_HUMAN_COV,
) = range(11)
N_GROUPS = 11


@njit(cache=True)
def _softplus(x):
    if x > 35.0:
        return x
    if x < -35.0:
        return 0.0
    return math.log1p(math.exp(x))


@njit(cache=True)
def _binom_rows(t1, t2, logscale, lo, hi, loglat, n, r, lgc):
    """Binomial log likelihood of rows [lo, hi) under one curve.

    Row j contributes r*log(p) + (n-r)*log(1-p) + log C(n,r) with
    logit(p) = t1 + exp(t2) * (logscale + loglat[j]).
    """
    s = 0.0
    slope = math.exp(t2)
    for idx in range(lo, hi):
        lin = t1 + slope * (logscale + loglat[idx])
        s += r[idx] * lin - n[idx] * _softplus(lin) + lgc[idx]
    return s


@njit(cache=True)
def _bvn(x1, x2, m1, m2, s1, s2, c):
    q = 1.0 - c * c
    z1 = (x1 - m1) / s1
    z2 = (x2 - m2) / s2
    quad = (z1 * z1 - 2.0 * c * z1 * z2 + z2 * z2) / q
    return -LOG_2PI - math.log(s1) - math.log(s2) - 0.5 * math.log(q) - 0.5 * quad


@njit(cache=True)
def _norm(x, m, sd):
    z = (x - m) / sd
    return -0.5 * (LOG_2PI + z * z) - math.log(sd)


@njit(cache=True)
def _halfnorm(x, scale):
    z = x / scale
    return math.log(2.0) - 0.5 * (LOG_2PI + z * z) - math.log(scale)


@njit(cache=True)
def _comp_logpdf(g1, g2, c, K, musp, tau, rho, muH, phi, eta, nex):
    """Log density of a subgroup curve under mixture component c."""
    if c < K:
        return _bvn(g1, g2, musp[c, 0], musp[c, 1], tau[0], tau[1], rho)
    if c == K:
        return _bvn(g1, g2, muH[0], muH[1], phi[0], phi[1], eta)
    return _bvn(g1, g2, nex[0], nex[1], nex[2], nex[3], nex[4])


@njit(cache=True)
def categorical_component(g1, g2, means, sds, corrs, logw, u):
    """Exact full-conditional draw of one subgroup's component indicator.

    Picks c with probability proportional to w_c * BVN(g; mean_c, cov_c),
    computed in log space with a max shift.  If every weighted density
    underflows to log-zero, falls back to the prior weights alone.
    """
    C = logw.shape[0]
    vals = np.empty(C)
    mx = -np.inf
    for c in range(C):
        if logw[c] == -np.inf:
            vals[c] = -np.inf
        else:
            vals[c] = logw[c] + _bvn(g1, g2, means[c, 0], means[c, 1], sds[c, 0], sds[c, 1], corrs[c])
        if vals[c] > mx:
            mx = vals[c]
    if mx == -np.inf:
        for c in range(C):
            vals[c] = logw[c]
            if vals[c] > mx:
                mx = vals[c]
    tot = 0.0
    for c in range(C):
        tot += math.exp(vals[c] - mx)
    threshold = u * tot
    acc = 0.0
    pick = 0
    for c in range(C):
        w = math.exp(vals[c] - mx)
        if w > 0.0:
            pick = c
            acc += w
            if threshold < acc:
                return c
    return pick


@njit(cache=True)
def _psi_terms(theta, musp, study_sp, gamma, zz, K, t1, t2, r):
    """All density terms conditioned on the study-level covariance."""
    s = 0.0
    for i in range(theta.shape[0]):
        k = study_sp[i]
        s += _bvn(theta[i, 0], theta[i, 1], musp[k, 0], musp[k, 1], t1, t2, r)
    for l in range(gamma.shape[0]):
        if zz[l] < K:
            k = zz[l]
            s += _bvn(gamma[l, 0], gamma[l, 1], musp[k, 0], musp[k, 1], t1, t2, r)
    return s


@njit(cache=True)
def _sigma_terms(musp, grand, s1, s2, r):
    tot = 0.0
    for k in range(musp.shape[0]):
        tot += _bvn(musp[k, 0], musp[k, 1], grand[0], grand[1], s1, s2, r)
    return tot


@njit(cache=True)
def _phi_terms(gamma, muH, zz, K, p1, p2, r):
    tot = 0.0
    for l in range(gamma.shape[0]):
        if zz[l] == K:
            tot += _bvn(gamma[l, 0], gamma[l, 1], muH[0], muH[1], p1, p2, r)
    return tot


@njit(cache=True)
def _total_logp(
    a_loglat, a_n, a_r, a_lgc, a_start, study_sp,
    h_loglat, h_n, h_r, h_lgc, h_start,
    logw, pv, dl_loc, dl_sc, e_sc, nex,
    theta, musp, grand, muH, gamma, zz, ud, ue, tau, sig, phi, cr,
):
    """Full log density in the sampler's standardized coordinates."""
    M = theta.shape[0]
    K = musp.shape[0]
    L = gamma.shape[0]
    tot = 0.0
    for i in range(M):
        k = study_sp[i]
        logdelta = dl_loc[k] + dl_sc[k] * ud[k]
        tot += _binom_rows(
            theta[i, 0], theta[i, 1], logdelta, a_start[i], a_start[i + 1], a_loglat, a_n, a_r, a_lgc
        )
        tot += _bvn(theta[i, 0], theta[i, 1], musp[k, 0], musp[k, 1], tau[0], tau[1], cr[0])
    for k in range(K):
        tot += _bvn(musp[k, 0], musp[k, 1], grand[0], grand[1], sig[0], sig[1], cr[1])
        tot += _norm(ud[k], 0.0, 1.0)
    for l in range(L):
        eps = 1.0 + e_sc[l] * ue[l]
        tot += _binom_rows(
            gamma[l, 0], gamma[l, 1], math.log(eps), h_start[l], h_start[l + 1], h_loglat, h_n, h_r, h_lgc
        )
        tot += logw[l, zz[l]]
        tot += _comp_logpdf(gamma[l, 0], gamma[l, 1], zz[l], K, musp, tau, cr[0], muH, phi, cr[2], nex)
        tot += _norm(ue[l], 0.0, 1.0)
    tot += _norm(grand[0], pv[0], pv[1]) + _norm(grand[1], pv[2], pv[3])
    tot += _norm(muH[0], pv[0], pv[1]) + _norm(muH[1], pv[2], pv[3])
    tot += _halfnorm(tau[0], pv[4]) + _halfnorm(tau[1], pv[5])
    tot += _halfnorm(sig[0], pv[6]) + _halfnorm(sig[1], pv[7])
    tot += _halfnorm(phi[0], pv[8]) + _halfnorm(phi[1], pv[9])
    return tot


@njit(cache=True)
def run_chain(
    rng, n_iter, n_burn, thin, upd,
    a_loglat, a_n, a_r, a_lgc, a_start, study_sp,
    h_loglat, h_n, h_r, h_lgc, h_start,
    logw, pv, dl_loc, dl_sc, e_sc, e_lo, e_hi, nex,
    theta, musp, grand, muH, gamma, zz, ud, ue, tau, sig, phi, cr,
    target2, target1,
):
    """One chain; mutates the state arrays in place (they end as the final state).

    Returns (draws, component_draws, accept, attempt, scales, running_logp,
    recomputed_logp).  The two log densities must agree to rounding; the
    caller verifies that and cross-checks against the reference density.
    """
    M = theta.shape[0]
    K = musp.shape[0]
    L = gamma.shape[0]
    C = K + 2
    P = 2 * M + 3 * K + 3 * L + 13
    n_keep = 0
    if n_iter > n_burn:
        n_keep = (n_iter - n_burn + thin - 1) // thin
    draws = np.empty((n_keep, P))
    zdraws = np.empty((n_keep, L), dtype=np.int64)

    # random-walk blocks: curves, mean vectors, then each scalar
    NB = M + K + 2 + L + K + L + 9
    scales = np.full(NB, 0.5)
    accept = np.zeros(NB)
    attempt = np.zeros(NB)
    nadapt = np.zeros(NB)
    bS = M
    bG = M + K
    bH = bG + 1
    bC = bH + 1
    bD = bC + L
    bE = bD + K
    bV = bE + L

    logdelta = np.empty(K)
    for k in range(K):
        logdelta[k] = dl_loc[k] + dl_sc[k] * ud[k]
    alik = np.empty(M)
    tmp_alik = np.empty(M)
    for i in range(M):
        alik[i] = _binom_rows(
            theta[i, 0], theta[i, 1], logdelta[study_sp[i]], a_start[i], a_start[i + 1],
            a_loglat, a_n, a_r, a_lgc,
        )
    logeps = np.empty(L)
    hlik = np.empty(L)
    for l in range(L):
        logeps[l] = math.log(1.0 + e_sc[l] * ue[l])
        hlik[l] = _binom_rows(
            gamma[l, 0], gamma[l, 1], logeps[l], h_start[l], h_start[l + 1],
            h_loglat, h_n, h_r, h_lgc,
        )

    total = _total_logp(
        a_loglat, a_n, a_r, a_lgc, a_start, study_sp,
        h_loglat, h_n, h_r, h_lgc, h_start,
        logw, pv, dl_loc, dl_sc, e_sc, nex,
        theta, musp, grand, muH, gamma, zz, ud, ue, tau, sig, phi, cr,
    )

    cm = np.empty((C, 2))
    cs = np.empty((C, 2))
    cc = np.empty(C)

    t_out = 0
    for it in range(n_iter):
        adapting = it < n_burn

        if upd[G_STUDY]:
            for i in range(M):
                b = i
                s = scales[b]
                k = study_sp[i]
                p1 = theta[i, 0] + s * rng.normal(0.0, 1.0)
                p2 = theta[i, 1] + s * rng.normal(0.0, 1.0)
                nal = _binom_rows(p1, p2, logdelta[k], a_start[i], a_start[i + 1], a_loglat, a_n, a_r, a_lgc)
                d = (
                    nal
                    - alik[i]
                    + _bvn(p1, p2, musp[k, 0], musp[k, 1], tau[0], tau[1], cr[0])
                    - _bvn(theta[i, 0], theta[i, 1], musp[k, 0], musp[k, 1], tau[0], tau[1], cr[0])
                )
                alpha = math.exp(d) if d < 0.0 else 1.0
                if rng.random() < alpha:
                    theta[i, 0] = p1
                    theta[i, 1] = p2
                    alik[i] = nal
                    total += d
                    accept[b] += 1.0
                attempt[b] += 1.0
                if adapting:
                    nadapt[b] += 1.0
                    scales[b] = s * math.exp((alpha - target2) / nadapt[b] ** 0.66)

        if upd[G_SPECIES_MEAN]:
            for k in range(K):
                b = bS + k
                s = scales[b]
                p1 = musp[k, 0] + s * rng.normal(0.0, 1.0)
                p2 = musp[k, 1] + s * rng.normal(0.0, 1.0)
                d = _bvn(p1, p2, grand[0], grand[1], sig[0], sig[1], cr[1]) - _bvn(
                    musp[k, 0], musp[k, 1], grand[0], grand[1], sig[0], sig[1], cr[1]
                )
                for i in range(M):
                    if study_sp[i] == k:
                        d += _bvn(theta[i, 0], theta[i, 1], p1, p2, tau[0], tau[1], cr[0]) - _bvn(
                            theta[i, 0], theta[i, 1], musp[k, 0], musp[k, 1], tau[0], tau[1], cr[0]
                        )
                for l in range(L):
                    if zz[l] == k:
                        d += _bvn(gamma[l, 0], gamma[l, 1], p1, p2, tau[0], tau[1], cr[0]) - _bvn(
                            gamma[l, 0], gamma[l, 1], musp[k, 0], musp[k, 1], tau[0], tau[1], cr[0]
                        )
                alpha = math.exp(d) if d < 0.0 else 1.0
                if rng.random() < alpha:
                    musp[k, 0] = p1
                    musp[k, 1] = p2
                    total += d
                    accept[b] += 1.0
                attempt[b] += 1.0
                if adapting:
                    nadapt[b] += 1.0
                    scales[b] = s * math.exp((alpha - target2) / nadapt[b] ** 0.66)

        if upd[G_GRAND]:
            b = bG
            s = scales[b]
            p1 = grand[0] + s * rng.normal(0.0, 1.0)
            p2 = grand[1] + s * rng.normal(0.0, 1.0)
            alpha = 0.0
            if I_LO < p1 < I_HI and S_LO < p2 < S_HI:
                d = (
                    _norm(p1, pv[0], pv[1])
                    + _norm(p2, pv[2], pv[3])
                    - _norm(grand[0], pv[0], pv[1])
                    - _norm(grand[1], pv[2], pv[3])
                )
                for k in range(K):
                    d += _bvn(musp[k, 0], musp[k, 1], p1, p2, sig[0], sig[1], cr[1]) - _bvn(
                        musp[k, 0], musp[k, 1], grand[0], grand[1], sig[0], sig[1], cr[1]
                    )
                alpha = math.exp(d) if d < 0.0 else 1.0
                if rng.random() < alpha:
                    grand[0] = p1
                    grand[1] = p2
                    total += d
                    accept[b] += 1.0
            attempt[b] += 1.0
            if adapting:
                nadapt[b] += 1.0
                scales[b] = s * math.exp((alpha - target2) / nadapt[b] ** 0.66)

        if upd[G_HUMAN_MEAN]:
            b = bH
            s = scales[b]
            p1 = muH[0] + s * rng.normal(0.0, 1.0)
            p2 = muH[1] + s * rng.normal(0.0, 1.0)
            alpha = 0.0
            if I_LO < p1 < I_HI and S_LO < p2 < S_HI:
                d = (
                    _norm(p1, pv[0], pv[1])
                    + _norm(p2, pv[2], pv[3])
                    - _norm(muH[0], pv[0], pv[1])
                    - _norm(muH[1], pv[2], pv[3])
                )
                for l in range(L):
                    if zz[l] == K:
                        d += _bvn(gamma[l, 0], gamma[l, 1], p1, p2, phi[0], phi[1], cr[2]) - _bvn(
                            gamma[l, 0], gamma[l, 1], muH[0], muH[1], phi[0], phi[1], cr[2]
                        )
                alpha = math.exp(d) if d < 0.0 else 1.0
                if rng.random() < alpha:
                    muH[0] = p1
                    muH[1] = p2
                    total += d
                    accept[b] += 1.0
            attempt[b] += 1.0
            if adapting:
                nadapt[b] += 1.0
                scales[b] = s * math.exp((alpha - target2) / nadapt[b] ** 0.66)

        if upd[G_CURVE]:
            for l in range(L):
                b = bC + l
                s = scales[b]
                p1 = gamma[l, 0] + s * rng.normal(0.0, 1.0)
                p2 = gamma[l, 1] + s * rng.normal(0.0, 1.0)
                nhl = _binom_rows(p1, p2, logeps[l], h_start[l], h_start[l + 1], h_loglat, h_n, h_r, h_lgc)
                z = zz[l]
                d = (
                    nhl
                    - hlik[l]
                    + _comp_logpdf(p1, p2, z, K, musp, tau, cr[0], muH, phi, cr[2], nex)
                    - _comp_logpdf(gamma[l, 0], gamma[l, 1], z, K, musp, tau, cr[0], muH, phi, cr[2], nex)
                )
                alpha = math.exp(d) if d < 0.0 else 1.0
                if rng.random() < alpha:
                    gamma[l, 0] = p1
                    gamma[l, 1] = p2
                    hlik[l] = nhl
                    total += d
                    accept[b] += 1.0
                attempt[b] += 1.0
                if adapting:
                    nadapt[b] += 1.0
                    scales[b] = s * math.exp((alpha - target2) / nadapt[b] ** 0.66)

        if upd[G_COMPONENT]:
            for l in range(L):
                for c in range(K):
                    cm[c, 0] = musp[c, 0]
                    cm[c, 1] = musp[c, 1]
                    cs[c, 0] = tau[0]
                    cs[c, 1] = tau[1]
                    cc[c] = cr[0]
                cm[K, 0] = muH[0]
                cm[K, 1] = muH[1]
                cs[K, 0] = phi[0]
                cs[K, 1] = phi[1]
                cc[K] = cr[2]
                cm[K + 1, 0] = nex[0]
                cm[K + 1, 1] = nex[1]
                cs[K + 1, 0] = nex[2]
                cs[K + 1, 1] = nex[3]
                cc[K + 1] = nex[4]
                znew = categorical_component(gamma[l, 0], gamma[l, 1], cm, cs, cc, logw[l], rng.random())
                if znew != zz[l]:
                    total += (
                        logw[l, znew]
                        + _comp_logpdf(gamma[l, 0], gamma[l, 1], znew, K, musp, tau, cr[0], muH, phi, cr[2], nex)
                        - logw[l, zz[l]]
                        - _comp_logpdf(gamma[l, 0], gamma[l, 1], zz[l], K, musp, tau, cr[0], muH, phi, cr[2], nex)
                    )
                    zz[l] = znew

        if upd[G_CONVERSION]:
            for k in range(K):
                b = bD + k
                s = scales[b]
                p = ud[k] + s * rng.normal(0.0, 1.0)
                nld = dl_loc[k] + dl_sc[k] * p
                d = _norm(p, 0.0, 1.0) - _norm(ud[k], 0.0, 1.0)
                for i in range(M):
                    if study_sp[i] == k:
                        tmp_alik[i] = _binom_rows(
                            theta[i, 0], theta[i, 1], nld, a_start[i], a_start[i + 1],
                            a_loglat, a_n, a_r, a_lgc,
                        )
                        d += tmp_alik[i] - alik[i]
                alpha = math.exp(d) if d < 0.0 else 1.0
                if rng.random() < alpha:
                    ud[k] = p
                    logdelta[k] = nld
                    for i in range(M):
                        if study_sp[i] == k:
                            alik[i] = tmp_alik[i]
                    total += d
                    accept[b] += 1.0
                attempt[b] += 1.0
                if adapting:
                    nadapt[b] += 1.0
                    scales[b] = s * math.exp((alpha - target1) / nadapt[b] ** 0.66)

        if upd[G_BRIDGING]:
            for l in range(L):
                b = bE + l
                s = scales[b]
                p = ue[l] + s * rng.normal(0.0, 1.0)
                alpha = 0.0
                if e_lo[l] < p < e_hi[l]:
                    nle = math.log(1.0 + e_sc[l] * p)
                    nhl = _binom_rows(gamma[l, 0], gamma[l, 1], nle, h_start[l], h_start[l + 1], h_loglat, h_n, h_r, h_lgc)
                    d = nhl - hlik[l] + _norm(p, 0.0, 1.0) - _norm(ue[l], 0.0, 1.0)
                    alpha = math.exp(d) if d < 0.0 else 1.0
                    if rng.random() < alpha:
                        ue[l] = p
                        logeps[l] = nle
                        hlik[l] = nhl
                        total += d
                        accept[b] += 1.0
                attempt[b] += 1.0
                if adapting:
                    nadapt[b] += 1.0
                    scales[b] = s * math.exp((alpha - target1) / nadapt[b] ** 0.66)

        if upd[G_STUDY_COV]:
            # tau[0], tau[1], then the correlation
            for which in range(3):
                b = bV + which
                s = scales[b]
                p = (tau[which] if which < 2 else cr[0]) + s * rng.normal(0.0, 1.0)
                alpha = 0.0
                ok = p >= SD_FLOOR if which < 2 else C_LO < p < C_HI
                if ok:
                    if which == 0:
                        old = _psi_terms(theta, musp, study_sp, gamma, zz, K, tau[0], tau[1], cr[0])
                        new = _psi_terms(theta, musp, study_sp, gamma, zz, K, p, tau[1], cr[0])
                        d = new - old + _halfnorm(p, pv[4]) - _halfnorm(tau[0], pv[4])
                    elif which == 1:
                        old = _psi_terms(theta, musp, study_sp, gamma, zz, K, tau[0], tau[1], cr[0])
                        new = _psi_terms(theta, musp, study_sp, gamma, zz, K, tau[0], p, cr[0])
                        d = new - old + _halfnorm(p, pv[5]) - _halfnorm(tau[1], pv[5])
                    else:
                        old = _psi_terms(theta, musp, study_sp, gamma, zz, K, tau[0], tau[1], cr[0])
                        new = _psi_terms(theta, musp, study_sp, gamma, zz, K, tau[0], tau[1], p)
                        d = new - old
                    alpha = math.exp(d) if d < 0.0 else 1.0
                    if rng.random() < alpha:
                        if which == 0:
                            tau[0] = p
                        elif which == 1:
                            tau[1] = p
                        else:
                            cr[0] = p
                        total += d
                        accept[b] += 1.0
                attempt[b] += 1.0
                if adapting:
                    nadapt[b] += 1.0
                    scales[b] = s * math.exp((alpha - target1) / nadapt[b] ** 0.66)

        if upd[G_SPECIES_COV]:
            for which in range(3):
                b = bV + 3 + which
                s = scales[b]
                p = (sig[which] if which < 2 else cr[1]) + s * rng.normal(0.0, 1.0)
                alpha = 0.0
                ok = p >= SD_FLOOR if which < 2 else C_LO < p < C_HI
                if ok:
                    old = _sigma_terms(musp, grand, sig[0], sig[1], cr[1])
                    if which == 0:
                        new = _sigma_terms(musp, grand, p, sig[1], cr[1])
                        d = new - old + _halfnorm(p, pv[6]) - _halfnorm(sig[0], pv[6])
                    elif which == 1:
                        new = _sigma_terms(musp, grand, sig[0], p, cr[1])
                        d = new - old + _halfnorm(p, pv[7]) - _halfnorm(sig[1], pv[7])
                    else:
                        new = _sigma_terms(musp, grand, sig[0], sig[1], p)
                        d = new - old
                    alpha = math.exp(d) if d < 0.0 else 1.0
                    if rng.random() < alpha:
                        if which == 0:
                            sig[0] = p
                        elif which == 1:
                            sig[1] = p
                        else:
                            cr[1] = p
                        total += d
                        accept[b] += 1.0
                attempt[b] += 1.0
                if adapting:
                    nadapt[b] += 1.0
                    scales[b] = s * math.exp((alpha - target1) / nadapt[b] ** 0.66)

        if upd[G_HUMAN_COV]:
            for which in range(3):
                b = bV + 6 + which
                s = scales[b]
                p = (phi[which] if which < 2 else cr[2]) + s * rng.normal(0.0, 1.0)
                alpha = 0.0
                ok = p >= SD_FLOOR if which < 2 else C_LO < p < C_HI
                if ok:
                    old = _phi_terms(gamma, muH, zz, K, phi[0], phi[1], cr[2])
                    if which == 0:
                        new = _phi_terms(gamma, muH, zz, K, p, phi[1], cr[2])
                        d = new - old + _halfnorm(p, pv[8]) - _halfnorm(phi[0], pv[8])
                    elif which == 1:
                        new = _phi_terms(gamma, muH, zz, K, phi[0], p, cr[2])
                        d = new - old + _halfnorm(p, pv[9]) - _halfnorm(phi[1], pv[9])
                    else:
                        new = _phi_terms(gamma, muH, zz, K, phi[0], phi[1], p)
                        d = new - old
                    alpha = math.exp(d) if d < 0.0 else 1.0
                    if rng.random() < alpha:
                        if which == 0:
                            phi[0] = p
                        elif which == 1:
                            phi[1] = p
                        else:
                            cr[2] = p
                        total += d
                        accept[b] += 1.0
                attempt[b] += 1.0
                if adapting:
                    nadapt[b] += 1.0
                    scales[b] = s * math.exp((alpha - target1) / nadapt[b] ** 0.66)

        if it >= n_burn and (it - n_burn) % thin == 0:
            col = 0
            for i in range(M):
                draws[t_out, col] = theta[i, 0]
                draws[t_out, col + 1] = theta[i, 1]
                col += 2
            for k in range(K):
                draws[t_out, col] = musp[k, 0]
                draws[t_out, col + 1] = musp[k, 1]
                col += 2
            draws[t_out, col] = grand[0]
            draws[t_out, col + 1] = grand[1]
            col += 2
            draws[t_out, col] = muH[0]
            draws[t_out, col + 1] = muH[1]
            col += 2
            for l in range(L):
                draws[t_out, col] = gamma[l, 0]
                draws[t_out, col + 1] = gamma[l, 1]
                col += 2
            for k in range(K):
                draws[t_out, col] = ud[k]
                col += 1
            for l in range(L):
                draws[t_out, col] = ue[l]
                col += 1
            draws[t_out, col] = tau[0]
            draws[t_out, col + 1] = tau[1]
            draws[t_out, col + 2] = sig[0]
            draws[t_out, col + 3] = sig[1]
            draws[t_out, col + 4] = phi[0]
            draws[t_out, col + 5] = phi[1]
            draws[t_out, col + 6] = cr[0]
            draws[t_out, col + 7] = cr[1]
            draws[t_out, col + 8] = cr[2]
            for l in range(L):
                zdraws[t_out, l] = zz[l]
            t_out += 1

    final_total = _total_logp(
        a_loglat, a_n, a_r, a_lgc, a_start, study_sp,
        h_loglat, h_n, h_r, h_lgc, h_start,
        logw, pv, dl_loc, dl_sc, e_sc, nex,
        theta, musp, grand, muH, gamma, zz, ud, ue, tau, sig, phi, cr,
    )
    return draws, zdraws, accept, attempt, scales, total, final_total
