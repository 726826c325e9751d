"""Independent reference implementations used to freeze expected test values.

Everything here is deliberately written against numpy/scipy only, with no
imports from the package under test, so disagreements point at the package.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit, gammaln


def log_binom_pmf(n: np.ndarray, r: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Elementwise log Binomial(n, p) pmf at r, broadcasting over p."""
    n = np.asarray(n, dtype=float)
    r = np.asarray(r, dtype=float)
    lgc = gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lgc + r * np.log(p) + (n - r) * np.log1p(-p)
    # 0 * log(0) = 0 for the boundary cases p in {0, 1}
    out = np.where((r == 0) & (p == 0.0), lgc, out)
    out = np.where((r == n) & (p == 1.0), lgc, out)
    return out


def grid_posterior_p_summary(
    doses,
    reference_dose,
    n_per_dose,
    r_per_dose,
    prior_mean=(-1.099, 0.0),
    prior_sd=(2.0, 1.0),
    lo=(-10.0, -5.0),
    hi=(10.0, 5.0),
    n_grid=(1200, 900),
):
    """Posterior mean/sd of DLT risk at each dose for the 2-parameter model.

    Model: p(d) = expit(a + exp(b) * log(d / reference_dose)) with independent
    normal priors on (a, b) and a binomial likelihood per dose.  Integration
    is a plain midpoint rule over the rectangle [lo, hi].
    """
    doses = np.asarray(doses, dtype=float)
    n_per_dose = np.asarray(n_per_dose, dtype=float)
    r_per_dose = np.asarray(r_per_dose, dtype=float)

    a = np.linspace(lo[0], hi[0], n_grid[0] + 1)
    a = 0.5 * (a[1:] + a[:-1])
    b = np.linspace(lo[1], hi[1], n_grid[1] + 1)
    b = 0.5 * (b[1:] + b[:-1])
    A, B = np.meshgrid(a, b, indexing="ij")

    log_post = (
        -0.5 * ((A - prior_mean[0]) / prior_sd[0]) ** 2
        - 0.5 * ((B - prior_mean[1]) / prior_sd[1]) ** 2
    )
    log_ratios = np.log(doses / reference_dose)
    for j in range(len(doses)):
        if n_per_dose[j] == 0:
            continue
        pj = expit(A + np.exp(B) * log_ratios[j])
        log_post += log_binom_pmf(n_per_dose[j], r_per_dose[j], pj)

    log_post -= log_post.max()
    w = np.exp(log_post)
    w /= w.sum()

    means = np.empty(len(doses))
    sds = np.empty(len(doses))
    for j in range(len(doses)):
        pj = expit(A + np.exp(B) * log_ratios[j])
        m = float((w * pj).sum())
        v = float((w * (pj - m) ** 2).sum())
        means[j] = m
        sds[j] = math.sqrt(v)
    return means, sds


def bvn_logpdf(x, mean, sd, corr=0.0):
    """Log density of a bivariate normal at x (2-vector inputs)."""
    x1, x2 = float(x[0]), float(x[1])
    m1, m2 = float(mean[0]), float(mean[1])
    s1, s2 = float(sd[0]), float(sd[1])
    z1 = (x1 - m1) / s1
    z2 = (x2 - m2) / s2
    om = 1.0 - corr * corr
    quad = (z1 * z1 - 2.0 * corr * z1 * z2 + z2 * z2) / om
    return -math.log(2.0 * math.pi * s1 * s2 * math.sqrt(om)) - 0.5 * quad


def mixture_indicator_probs(gamma, components, weights):
    """Analytic full-conditional P(z = c | gamma) for a finite BVN mixture.

    components: sequence of ((mean1, mean2), (sd1, sd2, corr)).
    """
    logs = []
    for wgt, (mean, shape) in zip(weights, components):
        if wgt <= 0.0:
            logs.append(-np.inf)
            continue
        logs.append(math.log(wgt) + bvn_logpdf(gamma, mean, shape[:2], shape[2]))
    logs = np.asarray(logs)
    mx = logs.max()
    p = np.exp(logs - mx)
    return p / p.sum()


def split_rhat(chains: np.ndarray) -> float:
    """Split R-hat (rank-free form) for (n_chains, n_draws) arrays."""
    chains = np.asarray(chains, dtype=float)
    n = chains.shape[1] // 2
    halves = np.concatenate([chains[:, :n], chains[:, n : 2 * n]], axis=0)
    m, length = halves.shape
    means = halves.mean(axis=1)
    variances = halves.var(axis=1, ddof=1)
    W = variances.mean()
    B = length * means.var(ddof=1)
    var_plus = (length - 1) / length * W + B / length
    if W == 0.0:
        return math.inf if B > 0 else 1.0
    return math.sqrt(var_plus / W)


def beta_from_moments(mean: float, sd: float):
    """Moment-matched Beta(a, b): the standard two-moment inversion."""
    var = sd * sd
    nu = mean * (1.0 - mean) / var - 1.0
    return mean * nu, (1.0 - mean) * nu


def full_log_density_oracle(state, animal_studies, human_trials, config):
    """Independent re-summation of every additive piece of the log posterior.

    Reads only primitive fields off the passed objects; all math is local.
    Returns -inf when any parameter sits outside its support.
    """
    species = list(config.species)
    hyper = config.hyper
    tau = np.asarray(state.study_sds, dtype=float)
    sig = np.asarray(state.species_sds, dtype=float)
    phi = np.asarray(state.human_sds, dtype=float)

    if min(tau.min(), sig.min(), phi.min()) < 1e-3:
        return -math.inf
    for c in (state.study_corr, state.species_corr, state.human_corr):
        if not -1.0 < c < 1.0:
            return -math.inf
    for vec in (state.grand_mean, state.human_mean):
        if not (-10.0 < vec[0] < 10.0 and -5.0 < vec[1] < 5.0):
            return -math.inf

    def p_of(a, b, scale, dose, ref):
        return float(expit(a + math.exp(b) * math.log(scale * dose / ref)))

    def norm(x, mean, sd):
        return -0.5 * math.log(2.0 * math.pi) - math.log(sd) - 0.5 * ((x - mean) / sd) ** 2

    def halfnorm(x, scale):
        return math.log(2.0) + norm(x, 0.0, scale)

    total = 0.0
    for i, study in enumerate(animal_studies):
        k = species.index(study.species)
        a, b = map(float, state.study_curves[i])
        conv = float(state.conversion[k])
        if conv <= 0:
            return -math.inf
        for dose, n, r in zip(study.grid.doses, study.n_treated, study.n_events):
            if n:
                total += float(log_binom_pmf(n, r, p_of(a, b, conv, dose, study.grid.reference_dose)))
        mk = state.species_means[k]
        total += bvn_logpdf((a, b), (float(mk[0]), float(mk[1])), (tau[0], tau[1]), state.study_corr)

    for k in range(len(species)):
        total += bvn_logpdf(
            (float(state.species_means[k][0]), float(state.species_means[k][1])),
            (float(state.grand_mean[0]), float(state.grand_mean[1])),
            (sig[0], sig[1]),
            state.species_corr,
        )
        prior = config.translation.allometric[species[k]]
        d = float(state.conversion[k])
        total += norm(math.log(d), prior.log_location, prior.log_scale) - math.log(d)

    for ell, trial in enumerate(human_trials):
        a, b = map(float, state.subgroup_curves[ell])
        eps = float(state.bridging[ell])
        bridge = config.translation.bridging_for(trial.subgroup_id)
        if not 0.0 < eps < bridge.upper:
            return -math.inf
        n_per, r_per = trial.dose_tallies()
        for j, dose in enumerate(trial.grid.doses):
            if n_per[j]:
                total += float(
                    log_binom_pmf(int(n_per[j]), int(r_per[j]), p_of(a, b, eps, dose, trial.grid.reference_dose))
                )
        total += norm(eps, 1.0, bridge.scale)

        z = int(state.component[ell])
        if z < len(species):
            mean = (float(state.species_means[z][0]), float(state.species_means[z][1]))
            shape = (tau[0], tau[1], state.study_corr)
        elif z == len(species):
            mean = (float(state.human_mean[0]), float(state.human_mean[1]))
            shape = (phi[0], phi[1], state.human_corr)
        else:
            nex = hyper.non_exchangeable
            mean, shape = nex.mean, (*nex.sd, nex.correlation)
        total += bvn_logpdf((a, b), mean, shape[:2], shape[2])
        w = float(config.weights_for(trial.subgroup_id).as_array()[z])
        if w <= 0:
            return -math.inf
        total += math.log(w)

    for vec in (state.grand_mean, state.human_mean):
        total += norm(float(vec[0]), hyper.intercept_mean, hyper.intercept_sd)
        total += norm(float(vec[1]), hyper.log_slope_mean, hyper.log_slope_sd)
    for value, scale in zip(
        (tau[0], tau[1], sig[0], sig[1], phi[0], phi[1]),
        (*hyper.study_sd_scales, *hyper.species_sd_scales, *hyper.human_sd_scales),
    ):
        total += halfnorm(value, scale)
    return total
