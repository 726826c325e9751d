"""Posterior sampling: packing, chain orchestration, results.

run_posterior packs data and config into flat arrays, runs one JIT-compiled
chain per configured chain with its own counter-based random stream, checks
the kernel's incremental log-density bookkeeping against the pure-Python
reference density, and assembles a PosteriorResult.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from . import diagnostics as diag
from . import kernel, rng as rngmod
from .errors import ConfigError, DataError, EngineError
from .model import bvn_logpdf, standardized_log_joint, validate_model_inputs
from .types import (
    AnimalStudy,
    HumanTrialState,
    MixtureWeights,
    ModelConfig,
    ParameterState,
)

log = logging.getLogger(__name__)

BLOCK_GROUPS = (
    "study_curves",
    "species_means",
    "grand_mean",
    "human_mean",
    "subgroup_curves",
    "component",
    "conversion",
    "bridging",
    "study_cov",
    "species_cov",
    "human_cov",
)


@dataclass(frozen=True)
class SamplerSettings:
    """Knobs of the Metropolis-within-Gibbs run.

    n_iterations counts all iterations per chain including burn-in; draws
    with index < n_burnin are never stored.  fixed_blocks freezes named
    update groups at their initial values (used by reduced-model checks).
    max_stored_draws caps the per-chain draw matrices by even striding; all
    downstream summaries then use the capped draws.
    """

    n_chains: int = 2
    n_iterations: int = 15_000
    n_burnin: int = 5_000
    thinning: int = 1
    seed: int = 20_260_819
    adaptation_target_vector: float = 0.30
    adaptation_target_scalar: float = 0.44
    fixed_blocks: tuple[str, ...] = ()
    max_stored_draws: int | None = None

    def __post_init__(self):
        if self.n_chains < 1:
            raise ConfigError("n_chains must be >= 1")
        if self.n_iterations < 1:
            raise ConfigError("n_iterations must be >= 1")
        if not 0 <= self.n_burnin < self.n_iterations:
            raise ConfigError("n_burnin must satisfy 0 <= n_burnin < n_iterations")
        if self.thinning < 1:
            raise ConfigError("thinning must be >= 1")
        if not 0 < self.adaptation_target_vector < 1 or not 0 < self.adaptation_target_scalar < 1:
            raise ConfigError("adaptation targets must be probabilities")
        for name in self.fixed_blocks:
            if name not in BLOCK_GROUPS:
                raise ConfigError(f"unknown block group {name!r}; valid: {BLOCK_GROUPS}")
        object.__setattr__(self, "fixed_blocks", tuple(self.fixed_blocks))
        if self.max_stored_draws is not None and self.max_stored_draws < 1:
            raise ConfigError("max_stored_draws must be positive when set")

    @property
    def n_kept(self) -> int:
        return -(-(self.n_iterations - self.n_burnin) // self.thinning)


# budget used inside simulation campaigns; the full default is the reporting budget
REDUCED_SETTINGS = SamplerSettings(n_iterations=6_000, n_burnin=2_000)


@dataclass(frozen=True)
class _Packed:
    """Flat-array view of (data, config) consumed by the kernel."""

    a_loglat: np.ndarray
    a_n: np.ndarray
    a_r: np.ndarray
    a_lgc: np.ndarray
    a_start: np.ndarray
    study_sp: np.ndarray
    study_ids: tuple[str, ...]
    h_loglat: np.ndarray
    h_n: np.ndarray
    h_r: np.ndarray
    h_lgc: np.ndarray
    h_start: np.ndarray
    logw: np.ndarray
    pv: np.ndarray
    dl_loc: np.ndarray
    dl_sc: np.ndarray
    e_sc: np.ndarray
    e_lo: np.ndarray
    e_hi: np.ndarray
    nex: np.ndarray

    @property
    def M(self) -> int:
        return len(self.study_ids)

    @property
    def K(self) -> int:
        return self.dl_loc.shape[0]

    @property
    def L(self) -> int:
        return self.e_sc.shape[0]


def _log_choose(n: int, r: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)


def _pack(
    animal_studies: Sequence[AnimalStudy],
    human_trials: Sequence[HumanTrialState],
    config: ModelConfig,
) -> _Packed:
    validate_model_inputs(animal_studies, human_trials, config)
    species_index = {sp: k for k, sp in enumerate(config.species)}

    a_loglat, a_n, a_r, a_lgc, a_start, study_sp = [], [], [], [], [0], []
    for study in animal_studies:
        ratios = study.grid.log_ratios()
        for j, (n, r) in enumerate(zip(study.n_treated, study.n_events)):
            if n == 0:
                continue
            a_loglat.append(ratios[j])
            a_n.append(float(n))
            a_r.append(float(r))
            a_lgc.append(_log_choose(n, r))
        a_start.append(len(a_loglat))
        study_sp.append(species_index[study.species])

    h_loglat, h_n, h_r, h_lgc, h_start = [], [], [], [], [0]
    for trial in human_trials:
        ratios = trial.grid.log_ratios()
        n_per, r_per = trial.dose_tallies()
        for j in range(len(trial.grid)):
            if n_per[j] == 0:
                continue
            h_loglat.append(ratios[j])
            h_n.append(float(n_per[j]))
            h_r.append(float(r_per[j]))
            h_lgc.append(_log_choose(int(n_per[j]), int(r_per[j])))
        h_start.append(len(h_loglat))

    K = len(config.species)
    L = len(human_trials)
    logw = np.full((L, K + 2), -np.inf)
    for ell, trial in enumerate(human_trials):
        w = config.weights_for(trial.subgroup_id).as_array()
        with np.errstate(divide="ignore"):
            logw[ell] = np.where(w > 0, np.log(np.maximum(w, 1e-300)), -np.inf)

    hy = config.hyper
    pv = np.array(
        [
            hy.intercept_mean,
            hy.intercept_sd,
            hy.log_slope_mean,
            hy.log_slope_sd,
            hy.study_sd_scales[0],
            hy.study_sd_scales[1],
            hy.species_sd_scales[0],
            hy.species_sd_scales[1],
            hy.human_sd_scales[0],
            hy.human_sd_scales[1],
        ]
    )
    dl_loc = np.array([config.translation.allometric[sp].log_location for sp in config.species])
    dl_sc = np.array([config.translation.allometric[sp].log_scale for sp in config.species])
    e_sc = np.empty(L)
    e_lo = np.empty(L)
    e_hi = np.empty(L)
    for ell, trial in enumerate(human_trials):
        prior = config.translation.bridging_for(trial.subgroup_id)
        e_sc[ell] = prior.scale
        e_lo[ell], e_hi[ell] = prior.standardized_bounds
    nx = hy.non_exchangeable
    nex = np.array([nx.mean[0], nx.mean[1], nx.sd[0], nx.sd[1], nx.correlation])

    as_f = lambda xs: np.asarray(xs, dtype=np.float64)
    return _Packed(
        a_loglat=as_f(a_loglat),
        a_n=as_f(a_n),
        a_r=as_f(a_r),
        a_lgc=as_f(a_lgc),
        a_start=np.asarray(a_start, dtype=np.int64),
        study_sp=np.asarray(study_sp, dtype=np.int64),
        study_ids=tuple(s.study_id for s in animal_studies),
        h_loglat=as_f(h_loglat),
        h_n=as_f(h_n),
        h_r=as_f(h_r),
        h_lgc=as_f(h_lgc),
        h_start=np.asarray(h_start, dtype=np.int64),
        logw=logw,
        pv=pv,
        dl_loc=dl_loc,
        dl_sc=dl_sc,
        e_sc=e_sc,
        e_lo=e_lo,
        e_hi=e_hi,
        nex=nex,
    )


@dataclass
class _ChainState:
    theta: np.ndarray
    musp: np.ndarray
    grand: np.ndarray
    muH: np.ndarray
    gamma: np.ndarray
    zz: np.ndarray
    ud: np.ndarray
    ue: np.ndarray
    tau: np.ndarray
    sig: np.ndarray
    phi: np.ndarray
    cr: np.ndarray

    def to_parameter_state(self, pk: _Packed) -> ParameterState:
        return ParameterState(
            study_curves=self.theta.reshape(-1, 2),
            species_means=self.musp.reshape(-1, 2),
            grand_mean=self.grand,
            human_mean=self.muH,
            subgroup_curves=self.gamma.reshape(-1, 2),
            component=self.zz,
            conversion=np.exp(pk.dl_loc + pk.dl_sc * self.ud),
            bridging=1.0 + pk.e_sc * self.ue,
            study_sds=self.tau,
            species_sds=self.sig,
            human_sds=self.phi,
            study_corr=float(self.cr[0]),
            species_corr=float(self.cr[1]),
            human_corr=float(self.cr[2]),
        )


_HALF_NORMAL_MEDIAN = 0.6744897501960818


def _initial_state(
    pk: _Packed, gen: np.random.Generator, fixed: frozenset[str] = frozenset()
) -> _ChainState:
    """Dispersed but in-support starting point, fully determined by gen.

    Blocks named in `fixed` start at deterministic prior centers (means for
    locations, medians for half-normal scales, zero for correlations and the
    standardized conversion/bridging offsets) so a frozen block behaves as
    conditioning the model on known values.
    """
    M, K, L = pk.M, pk.K, pk.L
    pv = pk.pv

    def boxed(mean1, sd1, mean2, sd2):
        while True:
            x1 = mean1 + 0.3 * sd1 * gen.standard_normal()
            x2 = mean2 + 0.3 * sd2 * gen.standard_normal()
            if -10.0 < x1 < 10.0 and -5.0 < x2 < 5.0:
                return x1, x2

    grand = np.array(boxed(pv[0], pv[1], pv[2], pv[3]))
    muH = np.array(boxed(pv[0], pv[1], pv[2], pv[3]))
    tau = np.array([pv[4], pv[5]]) * (0.5 + 0.2 * np.abs(gen.standard_normal(2))) + 1e-3
    sig = np.array([pv[6], pv[7]]) * (0.5 + 0.2 * np.abs(gen.standard_normal(2))) + 1e-3
    phi = np.array([pv[8], pv[9]]) * (0.5 + 0.2 * np.abs(gen.standard_normal(2))) + 1e-3
    cr = gen.uniform(-0.3, 0.3, size=3)
    if "grand_mean" in fixed:
        grand = np.array([pv[0], pv[2]])
    if "human_mean" in fixed:
        muH = np.array([pv[0], pv[2]])
    if "study_cov" in fixed:
        tau = np.array([pv[4], pv[5]]) * _HALF_NORMAL_MEDIAN + 1e-3
    if "species_cov" in fixed:
        sig = np.array([pv[6], pv[7]]) * _HALF_NORMAL_MEDIAN + 1e-3
        cr[0] = 0.0
    if "human_cov" in fixed:
        phi = np.array([pv[8], pv[9]]) * _HALF_NORMAL_MEDIAN + 1e-3
        cr[1] = 0.0
    musp = grand[None, :] + 0.3 * np.array([pv[6], pv[7]]) * gen.standard_normal((K, 2))
    theta = musp[pk.study_sp] + 0.3 * np.array([pv[4], pv[5]]) * gen.standard_normal((M, 2))
    if "species_means" in fixed:
        musp = np.tile(grand, (K, 1))
    if "study_curves" in fixed:
        theta = musp[pk.study_sp].copy()

    zz = np.empty(L, dtype=np.int64)
    gamma = np.empty((L, 2))
    for ell in range(L):
        w = np.exp(pk.logw[ell] - np.max(pk.logw[ell]))
        w = w / w.sum()
        zz[ell] = int(gen.choice(len(w), p=w))
        if "component" in fixed:
            zz[ell] = int(np.argmax(pk.logw[ell]))
        c = zz[ell]
        if c < K:
            mean, spread = musp[c], np.array([pk.pv[4], pk.pv[5]])
        elif c == K:
            mean, spread = muH, phi
        else:
            mean, spread = pk.nex[:2], pk.nex[2:4]
        gamma[ell] = mean + 0.3 * spread * gen.standard_normal(2)
        if "subgroup_curves" in fixed:
            gamma[ell] = mean
    ud = 0.3 * gen.standard_normal(K)
    if "conversion" in fixed:
        ud = np.zeros(K)
    ue = np.empty(L)
    for ell in range(L):
        while True:
            u = 0.3 * gen.standard_normal()
            if pk.e_lo[ell] < u < pk.e_hi[ell]:
                ue[ell] = u
                break
    if "bridging" in fixed:
        ue = np.zeros(L)
    return _ChainState(
        theta=theta,
        musp=musp,
        grand=grand,
        muH=muH,
        gamma=gamma,
        zz=zz,
        ud=ud,
        ue=ue,
        tau=tau,
        sig=sig,
        phi=phi,
        cr=cr,
    )


def _param_layout(pk: _Packed, subgroups: Sequence[str], species: Sequence[str]) -> list[str]:
    """Column names of the kernel draw matrix, in kernel storage order."""
    names: list[str] = []
    for sid in pk.study_ids:
        names += [f"study_intercept[{sid}]", f"study_log_slope[{sid}]"]
    for sp in species:
        names += [f"species_mean_intercept[{sp}]", f"species_mean_log_slope[{sp}]"]
    names += ["grand_mean_intercept", "grand_mean_log_slope"]
    names += ["human_mean_intercept", "human_mean_log_slope"]
    for sub in subgroups:
        names += [f"curve_intercept[{sub}]", f"curve_log_slope[{sub}]"]
    for sp in species:
        names.append(f"conversion_std[{sp}]")
    for sub in subgroups:
        names.append(f"bridging_std[{sub}]")
    names += [
        "study_sd_intercept",
        "study_sd_log_slope",
        "species_sd_intercept",
        "species_sd_log_slope",
        "human_sd_intercept",
        "human_sd_log_slope",
        "study_corr",
        "species_corr",
        "human_corr",
    ]
    return names


_P_FLOOR = 1e-300
_P_CEIL = float(np.nextafter(1.0, 0.0))


@dataclass
class PosteriorResult:
    """Draws and summaries from one run_posterior call.

    All arrays are shaped (chains, draws, ...) and must be treated as
    immutable.  Toxicity draws are guaranteed inside (0, 1).
    """

    subgroups: tuple[str, ...]
    component_names: tuple[str, ...]
    doses: Mapping[str, tuple[float, ...]]
    reference_dose: float
    p_draws: Mapping[str, np.ndarray]
    curve_draws: Mapping[str, np.ndarray]
    bridging_draws: Mapping[str, np.ndarray]
    component_draws: Mapping[str, np.ndarray]
    param_draws: Mapping[str, np.ndarray]
    acceptance: Mapping[str, float]
    seed: int
    settings: SamplerSettings
    _diagnostics: dict | None = field(default=None, repr=False)

    def p_pooled(self, subgroup: str) -> np.ndarray:
        """(draws, doses) matrix with chains concatenated."""
        arr = self.p_draws[subgroup]
        return arr.reshape(-1, arr.shape[-1])

    def component_frequencies(self, subgroup: str) -> np.ndarray:
        z = self.component_draws[subgroup].reshape(-1)
        counts = np.bincount(z, minlength=len(self.component_names)).astype(float)
        return counts / counts.sum()

    def bridging_pooled(self, subgroup: str) -> np.ndarray:
        return self.bridging_draws[subgroup].reshape(-1)

    def curve_pooled(self, subgroup: str) -> np.ndarray:
        return self.curve_draws[subgroup].reshape(-1, 2)

    def diagnostics(self) -> dict[str, diag.ChainDiagnostic]:
        """Per-parameter split R-hat and Monte-Carlo ESS, computed lazily."""
        if self._diagnostics is None:
            chains: dict[str, np.ndarray] = dict(self.param_draws)
            for sub in self.subgroups:
                arr = self.p_draws[sub]
                for j, dose in enumerate(self.doses[sub]):
                    chains[f"p[{sub}, {dose:g}]"] = arr[:, :, j]
            self._diagnostics = diag.diagnostics(chains)
        return self._diagnostics


def _block_group_slices(M: int, K: int, L: int) -> dict[str, slice]:
    """Acceptance-counter index ranges per named block group."""
    bS = M
    bG = M + K
    bH = bG + 1
    bC = bH + 1
    bD = bC + L
    bE = bD + K
    bV = bE + L
    return {
        "study_curves": slice(0, M),
        "species_means": slice(bS, bS + K),
        "grand_mean": slice(bG, bG + 1),
        "human_mean": slice(bH, bH + 1),
        "subgroup_curves": slice(bC, bC + L),
        "conversion": slice(bD, bD + K),
        "bridging": slice(bE, bE + L),
        "study_cov": slice(bV, bV + 3),
        "species_cov": slice(bV + 3, bV + 6),
        "human_cov": slice(bV + 6, bV + 9),
    }


def run_posterior(
    animal_studies: Sequence[AnimalStudy],
    human_trials: Sequence[HumanTrialState],
    config: ModelConfig,
    settings: SamplerSettings,
) -> PosteriorResult:
    """Sample the joint posterior; bit-reproducible given (seed, settings, data, config)."""
    pk = _pack(animal_studies, human_trials, config)
    M, K, L = pk.M, pk.K, pk.L
    upd = np.ones(kernel.N_GROUPS, dtype=np.bool_)
    for name in settings.fixed_blocks:
        upd[BLOCK_GROUPS.index(name)] = False

    names = _param_layout(pk, config.subgroups, config.species)
    all_draws = []
    all_z = []
    accept = None
    attempt = None
    for c in range(settings.n_chains):
        init_gen = rngmod.generator(settings.seed, rngmod.stream_word(rngmod.INIT, c))
        st = _initial_state(pk, init_gen, frozenset(settings.fixed_blocks))
        check = standardized_log_joint(st.to_parameter_state(pk), animal_studies, human_trials, config)
        if not math.isfinite(check):
            raise EngineError(f"chain {c}: initial state has non-finite log density")
        chain_rng = rngmod.generator(settings.seed, rngmod.stream_word(rngmod.CHAIN, c))
        draws, zdraws, acc, att, _scales, running, recomputed = kernel.run_chain(
            chain_rng,
            settings.n_iterations,
            settings.n_burnin,
            settings.thinning,
            upd,
            pk.a_loglat, pk.a_n, pk.a_r, pk.a_lgc, pk.a_start, pk.study_sp,
            pk.h_loglat, pk.h_n, pk.h_r, pk.h_lgc, pk.h_start,
            pk.logw, pk.pv, pk.dl_loc, pk.dl_sc, pk.e_sc, pk.e_lo, pk.e_hi, pk.nex,
            st.theta, st.musp, st.grand, st.muH, st.gamma, st.zz,
            st.ud, st.ue, st.tau, st.sig, st.phi, st.cr,
            settings.adaptation_target_vector,
            settings.adaptation_target_scalar,
        )
        tol = 1e-6 * max(1.0, abs(recomputed))
        if abs(running - recomputed) > tol:
            raise EngineError(
                f"chain {c}: incremental log density drifted ({running} vs {recomputed})"
            )
        reference = standardized_log_joint(
            st.to_parameter_state(pk), animal_studies, human_trials, config
        )
        if abs(reference - recomputed) > tol:
            raise EngineError(
                f"chain {c}: kernel density disagrees with reference ({recomputed} vs {reference})"
            )
        all_draws.append(draws)
        all_z.append(zdraws)
        accept = acc if accept is None else accept + acc
        attempt = att if attempt is None else attempt + att

    draws = np.stack(all_draws)  # (C, T, P)
    zdraws = np.stack(all_z)  # (C, T, L)

    if settings.max_stored_draws is not None and draws.shape[1] > settings.max_stored_draws:
        stride = -(-draws.shape[1] // settings.max_stored_draws)
        draws = draws[:, ::stride]
        zdraws = zdraws[:, ::stride]

    col = {name: i for i, name in enumerate(names)}
    param_draws: dict[str, np.ndarray] = {}
    for name in names:
        param_draws[name] = draws[:, :, col[name]]
    # translate standardized coordinates into natural-scale factors
    for k, sp in enumerate(config.species):
        u = param_draws.pop(f"conversion_std[{sp}]")
        param_draws[f"conversion[{sp}]"] = np.exp(pk.dl_loc[k] + pk.dl_sc[k] * u)
    bridging_draws: dict[str, np.ndarray] = {}
    for ell, sub in enumerate(config.subgroups):
        u = param_draws.pop(f"bridging_std[{sub}]")
        bridging_draws[sub] = 1.0 + pk.e_sc[ell] * u
        param_draws[f"bridging[{sub}]"] = bridging_draws[sub]

    curve_draws: dict[str, np.ndarray] = {}
    p_draws: dict[str, np.ndarray] = {}
    doses: dict[str, tuple[float, ...]] = {}
    for ell, trial in enumerate(human_trials):
        sub = trial.subgroup_id
        g1 = param_draws[f"curve_intercept[{sub}]"]
        g2 = param_draws[f"curve_log_slope[{sub}]"]
        curve_draws[sub] = np.stack([g1, g2], axis=-1)
        ratios = trial.grid.log_ratios()
        lin = g1[..., None] + np.exp(g2)[..., None] * (
            np.log(bridging_draws[sub])[..., None] + ratios[None, None, :]
        )
        p = expit(lin)
        np.clip(p, _P_FLOOR, _P_CEIL, out=p)
        p_draws[sub] = p
        doses[sub] = trial.grid.doses

    component_draws = {sub: zdraws[:, :, ell] for ell, sub in enumerate(config.subgroups)}

    group_slices = _block_group_slices(M, K, L)
    acceptance: dict[str, float] = {}
    for gname, sl in group_slices.items():
        att = float(attempt[sl].sum())
        if att > 0:
            acceptance[gname] = float(accept[sl].sum()) / att

    for name, arr in param_draws.items():
        arr.flags.writeable = False
    reference_dose = (
        human_trials[0].grid.reference_dose
        if human_trials
        else animal_studies[0].grid.reference_dose
    )
    return PosteriorResult(
        subgroups=tuple(config.subgroups),
        component_names=config.component_names(),
        doses=doses,
        reference_dose=reference_dose,
        p_draws=p_draws,
        curve_draws=curve_draws,
        bridging_draws=bridging_draws,
        component_draws=component_draws,
        param_draws=param_draws,
        acceptance=acceptance,
        seed=settings.seed,
        settings=settings,
    )


def sample_mixture_indicator(
    gamma: Sequence[float],
    components: Sequence[tuple[Sequence[float], Sequence[float]]],
    weights: MixtureWeights | Sequence[float],
    uniform_draw: float,
) -> int:
    """Full-conditional draw of a component index.

    components is a list of ((mean1, mean2), (sd1, sd2, corr)); weights either
    a MixtureWeights (species..., human, robust order) or a plain vector of
    the same length.  Pure function: the uniform_draw argument carries all
    randomness.
    """
    if not 0.0 <= uniform_draw < 1.0:
        raise DataError("uniform_draw must lie in [0, 1)")
    w = np.asarray(weights.as_array() if isinstance(weights, MixtureWeights) else weights, dtype=float)
    if len(components) != w.shape[0]:
        raise ConfigError(f"{len(components)} components but {w.shape[0]} weights")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ConfigError("weights must be non-negative and sum to 1")
    means = np.empty((len(components), 2))
    sds = np.empty((len(components), 2))
    corrs = np.empty(len(components))
    for c, (mean, cov) in enumerate(components):
        m1, m2 = mean
        s1, s2, r = cov
        if s1 <= 0 or s2 <= 0 or not -1.0 < r < 1.0:
            raise ConfigError(f"component {c}: invalid covariance triple {(s1, s2, r)}")
        means[c] = (m1, m2)
        sds[c] = (s1, s2)
        corrs[c] = r
    with np.errstate(divide="ignore"):
        logw = np.where(w > 0, np.log(np.maximum(w, 1e-300)), -np.inf)
    g1, g2 = float(gamma[0]), float(gamma[1])
    with np.errstate(over="ignore"):
        dens = np.array(
            [
                -np.inf
                if logw[c] == -np.inf
                else logw[c] + bvn_logpdf(g1, g2, means[c, 0], means[c, 1], sds[c, 0], sds[c, 1], corrs[c])
                for c in range(len(components))
            ]
        )
    if np.max(dens) == -np.inf:
        log.warning("all weighted component densities are zero; falling back to prior weights")
    return int(kernel.categorical_component(g1, g2, means, sds, corrs, logw, float(uniform_draw)))


@dataclass(frozen=True)
class PredictiveSummary:
    subgroup: str
    dose: float
    median: float
    lower: float
    upper: float
    mean: float
    sd: float


@dataclass(frozen=True)
class PriorPredictive:
    rows: tuple[PredictiveSummary, ...]
    result: PosteriorResult

    def for_subgroup(self, subgroup: str) -> tuple[PredictiveSummary, ...]:
        return tuple(r for r in self.rows if r.subgroup == subgroup)


def summarize_p(result: PosteriorResult) -> tuple[PredictiveSummary, ...]:
    """Per-dose, per-subgroup summary of the toxicity-probability draws."""
    rows = []
    for sub in result.subgroups:
        pooled = result.p_pooled(sub)
        med = np.median(pooled, axis=0)
        lo, hi = np.quantile(pooled, [0.025, 0.975], axis=0)
        mean = pooled.mean(axis=0)
        sd = pooled.std(axis=0, ddof=1)
        for j, dose in enumerate(result.doses[sub]):
            rows.append(
                PredictiveSummary(
                    subgroup=sub,
                    dose=dose,
                    median=float(med[j]),
                    lower=float(lo[j]),
                    upper=float(hi[j]),
                    mean=float(mean[j]),
                    sd=float(sd[j]),
                )
            )
    return tuple(rows)


def prior_predictive(
    animal_studies: Sequence[AnimalStudy],
    config: ModelConfig,
    settings: SamplerSettings,
    human_trials: Sequence[HumanTrialState],
) -> PriorPredictive:
    """Predictive toxicity summaries before any human data.

    human_trials supply the grids and subgroup ids and must carry zero
    cohorts; species-specific projections are chosen through the config's
    mixture weights (e.g. a lone species weight of 1).
    """
    for t in human_trials:
        if t.cohorts:
            raise DataError(f"subgroup {t.subgroup_id} already has cohorts; not a prior state")
    result = run_posterior(animal_studies, human_trials, config, settings)
    return PriorPredictive(rows=summarize_p(result), result=result)
