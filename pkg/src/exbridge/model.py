"""Joint density of the borrowing model, evaluated term by term.

The sampler keeps its own incremental bookkeeping for speed; this module is
the slow, legible reference the sampler is checked against at the end of
every chain.  Anything the model believes about the data lives here.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DataError
from .types import (
    CORRELATION_BOUNDS,
    INTERCEPT_BOUNDS,
    LOG_SLOPE_BOUNDS,
    SD_FLOOR,
    AnimalStudy,
    HumanTrialState,
    ModelConfig,
    ParameterState,
)

LOG_2PI = math.log(2.0 * math.pi)

TERM_NAMES = (
    "animal_likelihood",
    "human_likelihood",
    "study_effects",
    "species_effects",
    "subgroup_effects",
    "component_weights",
    "grand_mean_prior",
    "human_mean_prior",
    "scale_priors",
    "correlation_priors",
    "conversion_priors",
    "bridging_priors",
)


def tox_prob(
    intercept: float,
    log_slope: float,
    scale_factor: float,
    dose: float,
    reference_dose: float,
) -> float:
    """Toxicity probability at one dose: expit(a + exp(b) * log(s*d/d_ref)).

    ``log_slope`` of -inf is the flat-curve limit and gives expit(intercept);
    non-positive dose, scale factor or reference dose is a domain error.
    """
    if not (dose > 0 and scale_factor > 0 and reference_dose > 0):
        raise DataError("dose, scale factor and reference dose must all be positive")
    lin = intercept + math.exp(log_slope) * math.log(scale_factor * dose / reference_dose)
    if lin >= 0:
        return 1.0 / (1.0 + math.exp(-lin))
    e = math.exp(lin)
    return e / (1.0 + e)


def normal_logpdf(x: float, mean: float, sd: float) -> float:
    z = (x - mean) / sd
    return -0.5 * (LOG_2PI + z * z) - math.log(sd)


def halfnormal_logpdf(x: float, scale: float) -> float:
    """Density of |N(0, scale^2)| on x > 0."""
    z = x / scale
    return math.log(2.0) - 0.5 * (LOG_2PI + z * z) - math.log(scale)


def bvn_logpdf(
    x1: float, x2: float, mean1: float, mean2: float, sd1: float, sd2: float, corr: float
) -> float:
    """Bivariate normal log density with the covariance as (sd1, sd2, corr)."""
    q = 1.0 - corr * corr
    z1 = (x1 - mean1) / sd1
    z2 = (x2 - mean2) / sd2
    quad = (z1 * z1 - 2.0 * corr * z1 * z2 + z2 * z2) / q
    return -LOG_2PI - math.log(sd1) - math.log(sd2) - 0.5 * math.log(q) - 0.5 * quad


def binomial_logpmf(r: int, n: int, p: float) -> float:
    if p <= 0.0:
        return 0.0 if r == 0 else -math.inf
    if p >= 1.0:
        return 0.0 if r == n else -math.inf
    return (
        math.lgamma(n + 1)
        - math.lgamma(r + 1)
        - math.lgamma(n - r + 1)
        + r * math.log(p)
        + (n - r) * math.log1p(-p)
    )


def _in_box(x1: float, x2: float) -> bool:
    return (
        INTERCEPT_BOUNDS[0] < x1 < INTERCEPT_BOUNDS[1]
        and LOG_SLOPE_BOUNDS[0] < x2 < LOG_SLOPE_BOUNDS[1]
    )


def mixture_component_params(
    state: ParameterState, config: ModelConfig, subgroup_index: int, component: int
) -> tuple[float, float, float, float, float]:
    """(mean1, mean2, sd1, sd2, corr) of one mixture component for a subgroup.

    Components: one per species (a fresh study-level draw around that
    species' mean), then cross-subgroup human pooling, then the fixed
    robust prior.
    """
    K = len(config.species)
    if component < 0 or component >= K + 2:
        raise DataError(f"component {component} outside 0..{K + 1}")
    if component < K:
        mk = state.species_means[component]
        return (
            float(mk[0]),
            float(mk[1]),
            float(state.study_sds[0]),
            float(state.study_sds[1]),
            state.study_corr,
        )
    if component == K:
        return (
            float(state.human_mean[0]),
            float(state.human_mean[1]),
            float(state.human_sds[0]),
            float(state.human_sds[1]),
            state.human_corr,
        )
    nex = config.hyper.non_exchangeable
    return (nex.mean[0], nex.mean[1], nex.sd[0], nex.sd[1], nex.correlation)


def validate_model_inputs(
    animal_studies: Sequence[AnimalStudy],
    human_trials: Sequence[HumanTrialState],
    config: ModelConfig,
) -> None:
    """Check data and config fit together; raises before any sampling starts."""
    from .errors import ConfigError

    for s in animal_studies:
        if s.species not in config.species:
            raise ConfigError(f"study {s.study_id} species {s.species!r} not configured")
    ids = [h.subgroup_id for h in human_trials]
    if list(config.subgroups) != ids:
        raise ConfigError(f"trial subgroups {ids} must match configured order {list(config.subgroups)}")
    for sub in config.subgroups:
        config.weights_for(sub)  # raises with the subgroup named
    refs = {s.grid.reference_dose for s in animal_studies} | {h.grid.reference_dose for h in human_trials}
    if len(refs) > 1:
        raise DataError(f"reference doses disagree across datasets: {sorted(refs)}")


def _check_shapes(
    state: ParameterState,
    animal_studies: Sequence[AnimalStudy],
    human_trials: Sequence[HumanTrialState],
    config: ModelConfig,
) -> None:
    validate_model_inputs(animal_studies, human_trials, config)
    M, K, L = len(animal_studies), len(config.species), len(human_trials)
    if state.study_curves.shape[0] != M:
        raise DataError(f"state holds {state.study_curves.shape[0]} study curves for {M} studies")
    if state.species_means.shape[0] != K or state.conversion.shape[0] != K:
        raise DataError(f"state does not match {K} configured species")
    if state.subgroup_curves.shape[0] != L:
        raise DataError(f"state holds {state.subgroup_curves.shape[0]} subgroup curves for {L} trials")


def log_density_terms(
    state: ParameterState,
    animal_studies: Sequence[AnimalStudy],
    human_trials: Sequence[HumanTrialState],
    config: ModelConfig,
) -> dict[str, float]:
    """All additive pieces of the log posterior, keyed by TERM_NAMES.

    Structural problems (shape mismatches, unknown species, inconsistent
    reference doses) raise DataError; parameter values outside their support
    yield -inf terms instead.
    """
    _check_shapes(state, animal_studies, human_trials, config)
    K = len(config.species)
    species_index = {sp: k for k, sp in enumerate(config.species)}
    t: dict[str, float] = {}

    # binomial likelihoods
    ll = 0.0
    for i, study in enumerate(animal_studies):
        a, b = state.study_curves[i]
        conv = float(state.conversion[species_index[study.species]])
        if conv <= 0:
            continue  # support violation handled by conversion_priors below
        for dose, n, r in zip(study.grid.doses, study.n_treated, study.n_events):
            if n == 0:
                continue
            p = tox_prob(float(a), float(b), conv, dose, study.grid.reference_dose)
            ll += binomial_logpmf(r, n, p)
    t["animal_likelihood"] = ll

    ll = 0.0
    for ell, trial in enumerate(human_trials):
        a, b = state.subgroup_curves[ell]
        eps = float(state.bridging[ell])
        if eps <= 0:
            continue  # support violation handled by bridging_priors below
        n_per, r_per = trial.dose_tallies()
        for j, dose in enumerate(trial.grid.doses):
            if n_per[j] == 0:
                continue
            p = tox_prob(float(a), float(b), eps, dose, trial.grid.reference_dose)
            ll += binomial_logpmf(int(r_per[j]), int(n_per[j]), p)
    t["human_likelihood"] = ll

    # hierarchy: studies around species means, species means around the grand mean
    tau = state.study_sds
    sig = state.species_sds
    phi = state.human_sds
    scales_ok = all(
        v >= SD_FLOOR for v in (tau[0], tau[1], sig[0], sig[1], phi[0], phi[1])
    )
    corr_ok = all(
        CORRELATION_BOUNDS[0] < c < CORRELATION_BOUNDS[1]
        for c in (state.study_corr, state.species_corr, state.human_corr)
    )
    if not (scales_ok and corr_ok):
        # off-support covariance: the conditional terms are undefined, so report
        # them as 0 and let the violated prior term carry the -inf
        for name in TERM_NAMES:
            t.setdefault(name, 0.0)
        if not scales_ok:
            t["scale_priors"] = -math.inf
        if not corr_ok:
            t["correlation_priors"] = -math.inf
        return t

    acc = 0.0
    for i, study in enumerate(animal_studies):
        mk = state.species_means[species_index[study.species]]
        acc += bvn_logpdf(
            float(state.study_curves[i][0]),
            float(state.study_curves[i][1]),
            float(mk[0]),
            float(mk[1]),
            float(tau[0]),
            float(tau[1]),
            state.study_corr,
        )
    t["study_effects"] = acc

    acc = 0.0
    for k in range(K):
        acc += bvn_logpdf(
            float(state.species_means[k][0]),
            float(state.species_means[k][1]),
            float(state.grand_mean[0]),
            float(state.grand_mean[1]),
            float(sig[0]),
            float(sig[1]),
            state.species_corr,
        )
    t["species_effects"] = acc

    # subgroup curves given their latent component, plus the component weights
    acc = 0.0
    wacc = 0.0
    for ell, trial in enumerate(human_trials):
        z = int(state.component[ell])
        m1, m2, s1, s2, c = mixture_component_params(state, config, ell, z)
        acc += bvn_logpdf(
            float(state.subgroup_curves[ell][0]),
            float(state.subgroup_curves[ell][1]),
            m1,
            m2,
            s1,
            s2,
            c,
        )
        w = config.weights_for(trial.subgroup_id).as_array()[z]
        wacc += math.log(w) if w > 0 else -math.inf
    t["subgroup_effects"] = acc
    t["component_weights"] = wacc

    hy = config.hyper
    for name, vec in (("grand_mean_prior", state.grand_mean), ("human_mean_prior", state.human_mean)):
        if not _in_box(float(vec[0]), float(vec[1])):
            t[name] = -math.inf
        else:
            t[name] = normal_logpdf(float(vec[0]), hy.intercept_mean, hy.intercept_sd) + normal_logpdf(
                float(vec[1]), hy.log_slope_mean, hy.log_slope_sd
            )

    acc = 0.0
    for value, scale in (
        (float(tau[0]), hy.study_sd_scales[0]),
        (float(tau[1]), hy.study_sd_scales[1]),
        (float(sig[0]), hy.species_sd_scales[0]),
        (float(sig[1]), hy.species_sd_scales[1]),
        (float(phi[0]), hy.human_sd_scales[0]),
        (float(phi[1]), hy.human_sd_scales[1]),
    ):
        acc += halfnormal_logpdf(value, scale)
    t["scale_priors"] = acc
    t["correlation_priors"] = 0.0  # uniform on (-1, 1); bounds already checked

    acc = 0.0
    for k, sp in enumerate(config.species):
        prior = config.translation.allometric[sp]
        d = float(state.conversion[k])
        if d <= 0:
            acc = -math.inf
            break
        acc += normal_logpdf(math.log(d), prior.log_location, prior.log_scale) - math.log(d)
    t["conversion_priors"] = acc

    acc = 0.0
    for ell, trial in enumerate(human_trials):
        prior = config.translation.bridging_for(trial.subgroup_id)
        e = float(state.bridging[ell])
        if not (0.0 < e < prior.upper):
            acc = -math.inf
            break
        acc += normal_logpdf(e, 1.0, prior.scale)
    t["bridging_priors"] = acc
    return t


def log_joint_density(
    state: ParameterState,
    animal_studies: Sequence[AnimalStudy],
    human_trials: Sequence[HumanTrialState],
    config: ModelConfig,
) -> float:
    """Full log posterior density up to an additive constant.

    -inf whenever any parameter sits outside its support; structural
    mismatches between state, data and config raise instead.
    """
    terms = log_density_terms(state, animal_studies, human_trials, config)
    values = list(terms.values())
    if any(v == -math.inf for v in values):
        return -math.inf
    return math.fsum(values)


def standardized_log_joint(
    state: ParameterState,
    animal_studies: Sequence[AnimalStudy],
    human_trials: Sequence[HumanTrialState],
    config: ModelConfig,
) -> float:
    """Log density in the sampler's coordinates.

    The sampler moves the translation factors on standardized scales
    (u = (log(conversion) - loc)/scale and u = (bridging - 1)/scale), so its
    density differs from log_joint_density by the change-of-variables terms.
    This is the quantity the chain's internal bookkeeping must reproduce.
    """
    base = log_joint_density(state, animal_studies, human_trials, config)
    if base == -math.inf:
        return -math.inf
    adjust = 0.0
    for k, sp in enumerate(config.species):
        prior = config.translation.allometric[sp]
        adjust += math.log(float(state.conversion[k])) + math.log(prior.log_scale)
    for ell, trial in enumerate(human_trials):
        adjust += math.log(config.translation.bridging_for(trial.subgroup_id).scale)
    return base + adjust
