"""Paired sequential dose-escalation trials under simulated truth.

Each replicate conducts trial T1 to completion or early stop, then trial T2
with the variant's co-data conditioning.  Every interim analysis is a full
posterior fit; decisions, accrual, and final outcomes are recorded so that
operating characteristics can be recomputed from the records alone.

Determinism: a replicate is a pure function of (scenario, variant, design,
seed).  Outcome draws use streams keyed by (trial index, cohort index) and
fit seeds use a fixed per-replicate index scheme, so two variants whose
configurations coincide for a phase see identical data and identical fits.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from . import rng as rngmod
from .decisions import (
    DoseDecision,
    IntervalThresholds,
    declare_mtd,
    recommend_next_dose,
    starting_dose,
)
from .errors import ConfigError, DataError, EngineError
from .mcmc import REDUCED_SETTINGS, PosteriorResult, SamplerSettings, run_posterior
from .scenarios import TRIAL_1, TRIAL_2, AnalysisModelVariant, ScenarioSpec
from .types import (
    AnimalStudy,
    Cohort,
    DoseGrid,
    HumanTrialState,
    MixtureWeights,
    ModelConfig,
)

# fit-index scheme: T1 interim after cohort c -> c-1; T2 start -> 100;
# T2 interim after cohort c -> 100+c.  Variants sharing a phase config
# therefore share fit seeds draw for draw.
_T2_START_INDEX = 100


@dataclass(frozen=True)
class SimulationDesign:
    """Everything a replicate needs besides truth, variant, and seed.

    model_config is the full two-subgroup configuration (variant A); the
    other variants are derived from it by dropping species or overriding
    weights.  sampler is the per-fit budget, reduced by default.
    """

    animal_studies: tuple[AnimalStudy, ...]
    model_config: ModelConfig
    grid: DoseGrid
    thresholds: IntervalThresholds = IntervalThresholds()
    sampler: SamplerSettings = REDUCED_SETTINGS
    max_sample_size: int = 24
    cohort_size: int = 3

    def __post_init__(self):
        object.__setattr__(self, "animal_studies", tuple(self.animal_studies))
        if self.model_config.subgroups != (TRIAL_1, TRIAL_2):
            raise ConfigError(
                f"design requires subgroups {(TRIAL_1, TRIAL_2)}, got {self.model_config.subgroups}"
            )
        if self.max_sample_size < self.cohort_size or self.cohort_size < 1:
            raise ConfigError("need cohort_size >= 1 and max_sample_size >= cohort_size")


@dataclass(frozen=True)
class InterimDecision:
    """One posterior-driven decision and the seed of the fit behind it."""

    n_cohorts: int
    fit_seed: int | None  # None for protocol-fixed starts (no fit involved)
    decision: DoseDecision


@dataclass(frozen=True)
class TrialRecord:
    subgroup: str
    cohorts: tuple[Cohort, ...]
    decisions: tuple[InterimDecision, ...]
    stopped_early: bool
    mtd_index: int | None
    bridging_mean: float | None
    component_means: tuple[float, ...] | None

    def __post_init__(self):
        object.__setattr__(self, "cohorts", tuple(self.cohorts))
        object.__setattr__(self, "decisions", tuple(self.decisions))

    @property
    def n_patients(self) -> int:
        return sum(c.n_treated for c in self.cohorts)

    @property
    def n_events(self) -> int:
        return sum(c.n_events for c in self.cohorts)


@dataclass(frozen=True)
class TrialPairRecord:
    scenario: str
    variant: str
    replicate_seed: int
    first: TrialRecord
    second: TrialRecord


def simulate_outcomes(true_p: float, n: int, rng: np.random.Generator) -> int:
    """DLT count for one cohort; binomial draw off the supplied stream."""
    if not 0.0 <= true_p <= 1.0:
        raise DataError(f"true toxicity probability {true_p} outside [0, 1]")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DataError(f"cohort size must be a positive integer, got {n!r}")
    return int(rng.binomial(int(n), float(true_p)))


def _no_species_weights(human: float, robust: float) -> MixtureWeights:
    return MixtureWeights(species=(), human=human, robust=robust)


def _variant_weights(
    variant: AnalysisModelVariant, base: ModelConfig
) -> tuple[tuple[str, ...], Mapping[str, MixtureWeights]]:
    """Species tuple and per-subgroup weights induced by the variant tag."""
    if variant.tag == "A":
        return base.species, dict(base.weights)
    if variant.tag == "B":
        w = _no_species_weights(1.0 - variant.robust_weight, variant.robust_weight)
        return (), {sub: w for sub in base.subgroups}
    if variant.tag in ("C", "E"):
        w = _no_species_weights(0.0, 1.0)
        return (), {sub: w for sub in base.subgroups}
    # D: animal components kept, cross-subgroup pooling off for every
    # subgroup.  The shared vector is the first subgroup's, which the stock
    # configuration already pins at zero pooling weight.
    lead = base.weights[base.subgroups[0]]
    if lead.human != 0.0:
        raise ConfigError(
            "variant D needs the first subgroup's pooling weight to be zero; "
            f"got {lead.human}"
        )
    return base.species, {sub: lead for sub in base.subgroups}


def _fit_config(
    design: SimulationDesign, variant: AnalysisModelVariant, subgroups: tuple[str, ...]
) -> ModelConfig:
    species, weights = _variant_weights(variant, design.model_config)
    return ModelConfig(
        species=species,
        subgroups=subgroups,
        hyper=design.model_config.hyper,
        translation=design.model_config.translation,
        weights={sub: weights[sub] for sub in subgroups},
    )


def _fit_inputs(
    design: SimulationDesign,
    variant: AnalysisModelVariant,
    phase: str,
    t1: HumanTrialState,
    t2: HumanTrialState | None,
) -> tuple[tuple[AnimalStudy, ...], list[HumanTrialState], ModelConfig]:
    """Data and configuration for one interim fit of the given phase."""
    animal = design.animal_studies if variant.uses_animal_data else ()
    if phase == TRIAL_1:
        return animal, [t1], _fit_config(design, variant, (TRIAL_1,))
    if variant.pools_first_trial:
        pooled = HumanTrialState(
            subgroup_id=TRIAL_2,
            grid=design.grid,
            cohorts=t1.cohorts + t2.cohorts,
            max_sample_size=2 * design.max_sample_size,
            cohort_size=design.cohort_size,
        )
        return animal, [pooled], _fit_config(design, variant, (TRIAL_2,))
    if variant.second_trial_sees_first:
        return animal, [t1, t2], _fit_config(design, variant, (TRIAL_1, TRIAL_2))
    return animal, [t2], _fit_config(design, variant, (TRIAL_2,))


def _fit(
    design: SimulationDesign,
    variant: AnalysisModelVariant,
    phase: str,
    t1: HumanTrialState,
    t2: HumanTrialState | None,
    fit_seed: int,
) -> PosteriorResult:
    animal, trials, config = _fit_inputs(design, variant, phase, t1, t2)
    settings = replace(design.sampler, seed=fit_seed)
    return run_posterior(animal, trials, config, settings)


def _empty_trial(design: SimulationDesign, subgroup: str) -> HumanTrialState:
    return HumanTrialState(
        subgroup_id=subgroup,
        grid=design.grid,
        cohorts=(),
        max_sample_size=design.max_sample_size,
        cohort_size=design.cohort_size,
    )


def _run_phase(
    design: SimulationDesign,
    variant: AnalysisModelVariant,
    scenario: ScenarioSpec,
    phase: str,
    trial_index: int,
    seed: int,
    t1_final: HumanTrialState | None,
    start: DoseDecision,
    start_seed: int | None,
) -> TrialRecord:
    truth = scenario.true_tox[phase]
    if len(truth) != len(design.grid):
        raise ConfigError(
            f"scenario {scenario.name} carries {len(truth)} doses, grid has {len(design.grid)}"
        )
    trial = _empty_trial(design, phase)
    decisions = [InterimDecision(0, start_seed, start)]
    dose = start.dose_index
    stopped = False
    mtd = None
    final: PosteriorResult | None = None
    try:
        while True:
            n_cohorts = len(trial.cohorts)
            outcome_rng = rngmod.generator(
                seed, rngmod.stream_word(rngmod.OUTCOME, trial_index, n_cohorts)
            )
            events = simulate_outcomes(truth[dose], design.cohort_size, outcome_rng)
            trial = trial.with_cohort(Cohort(dose, design.cohort_size, events))

            fit_index = len(trial.cohorts) - 1 if phase == TRIAL_1 else _T2_START_INDEX + len(trial.cohorts)
            fit_seed = rngmod.mix64(seed, fit_index)
            final = _fit(design, variant, phase, t1_final or trial, trial, fit_seed)
            draws = final.p_pooled(phase)
            decision = recommend_next_dose(draws, trial, design.thresholds)
            decisions.append(InterimDecision(len(trial.cohorts), fit_seed, decision))
            if decision.kind == "complete":
                mtd = declare_mtd(draws, trial, design.thresholds)
                break
            if decision.kind == "stop_for_safety":
                stopped = True
                break
            dose = decision.dose_index
    except EngineError as exc:
        raise EngineError(f"replicate seed {seed}, trial {phase}: {exc}") from exc

    return TrialRecord(
        subgroup=phase,
        cohorts=trial.cohorts,
        decisions=tuple(decisions),
        stopped_early=stopped,
        mtd_index=mtd,
        bridging_mean=float(np.mean(final.bridging_pooled(phase))),
        component_means=tuple(float(f) for f in final.component_frequencies(phase)),
    )


def simulate_trial_pair(
    scenario: ScenarioSpec,
    variant: AnalysisModelVariant,
    design: SimulationDesign,
    seed: int,
) -> TrialPairRecord:
    """Run one T1-then-T2 replicate and record everything decision-relevant."""
    start1 = DoseDecision(kind="start", dose_index=0, rationale=())
    first = _run_phase(design, variant, scenario, TRIAL_1, 0, seed, None, start1, None)

    t1_final = HumanTrialState(
        subgroup_id=TRIAL_1,
        grid=design.grid,
        cohorts=first.cohorts,
        max_sample_size=design.max_sample_size,
        cohort_size=design.cohort_size,
    )
    if variant.informed_start:
        start_seed = rngmod.mix64(seed, _T2_START_INDEX)
        res = _fit(design, variant, TRIAL_2, t1_final, _empty_trial(design, TRIAL_2), start_seed)
        start2 = starting_dose(res.p_pooled(TRIAL_2), design.thresholds)
    else:
        start_seed = None
        start2 = DoseDecision(kind="start", dose_index=0, rationale=())
    second = _run_phase(
        design, variant, scenario, TRIAL_2, 1, seed, t1_final, start2, start_seed
    )
    return TrialPairRecord(
        scenario=scenario.name,
        variant=variant.tag,
        replicate_seed=seed,
        first=first,
        second=second,
    )


@dataclass(frozen=True)
class TrialOC:
    """Aggregated operating characteristics for one trial position."""

    subgroup: str
    n_replicates: int
    pct_stopped_early: float
    pct_no_mtd: float  # completed yet no admissible administered dose
    pct_mtd: tuple[float, ...]
    pct_correct: float | None  # vs the scenario target; None without one recorded
    mean_patients_per_dose: tuple[float, ...]
    mean_dlt_count: float

    def __post_init__(self):
        total = math.fsum((self.pct_stopped_early, self.pct_no_mtd, *self.pct_mtd))
        if abs(total - 100.0) > 1e-6:
            raise DataError(f"outcome percentages sum to {total}, not 100")


@dataclass(frozen=True)
class OCReport:
    scenario: str
    variant: str
    n_replicates: int
    trials: Mapping[str, TrialOC]

    def __post_init__(self):
        object.__setattr__(self, "trials", dict(self.trials))


def _trial_oc(
    records: Sequence[TrialRecord],
    subgroup: str,
    n_doses: int,
    target: int | None,
    scored: bool,
) -> TrialOC:
    n = len(records)
    stopped = sum(r.stopped_early for r in records)
    mtd_counts = [0] * n_doses
    no_mtd = 0
    patients = np.zeros(n_doses)
    dlt_total = 0
    for r in records:
        if r.stopped_early:
            pass
        elif r.mtd_index is None:
            no_mtd += 1
        else:
            mtd_counts[r.mtd_index] += 1
        for c in r.cohorts:
            patients[c.dose_index] += c.n_treated
        dlt_total += r.n_events
    def pct(k: int) -> float:
        return 100.0 * k / n

    if not scored:
        correct = None
    elif target is None:
        # a scenario with no acceptable dose counts stop/no-declaration as correct
        correct = pct(stopped + no_mtd)
    else:
        correct = pct(mtd_counts[target])
    return TrialOC(
        subgroup=subgroup,
        n_replicates=n,
        pct_stopped_early=pct(stopped),
        pct_no_mtd=pct(no_mtd),
        pct_mtd=tuple(pct(k) for k in mtd_counts),
        pct_correct=correct,
        mean_patients_per_dose=tuple(float(x) for x in patients / n),
        mean_dlt_count=dlt_total / n,
    )


def operating_characteristics(
    records: Sequence[TrialPairRecord], scenario: ScenarioSpec | None = None
) -> OCReport:
    """Aggregate replicate records; pass the scenario to score correct selection."""
    records = list(records)
    if not records:
        raise DataError("no replicate records to aggregate")
    names = {r.scenario for r in records}
    tags = {r.variant for r in records}
    if len(names) > 1 or len(tags) > 1:
        raise ConfigError(f"records mix scenarios {names} / variants {tags}")
    if scenario is not None and scenario.name != records[0].scenario:
        raise ConfigError(
            f"records are for scenario {records[0].scenario}, got spec for {scenario.name}"
        )
    if scenario is not None:
        n_doses = len(scenario.true_tox[TRIAL_1])
    else:
        # every trial has at least one fitted decision; its rationale spans the grid
        n_doses = len(records[0].first.decisions[-1].decision.rationale)
    scored = scenario is not None
    targets = scenario.target_dose if scored else {}
    return OCReport(
        scenario=records[0].scenario,
        variant=records[0].variant,
        n_replicates=len(records),
        trials={
            TRIAL_1: _trial_oc([r.first for r in records], TRIAL_1, n_doses,
                               targets.get(TRIAL_1), scored),
            TRIAL_2: _trial_oc([r.second for r in records], TRIAL_2, n_doses,
                               targets.get(TRIAL_2), scored),
        },
    )


def _one_replicate(args) -> TrialPairRecord:
    scenario, variant, design, master_seed, index = args
    return simulate_trial_pair(
        scenario, variant, design, rngmod.replicate_seed(master_seed, index)
    )


def run_campaign(
    scenario: ScenarioSpec,
    variant: AnalysisModelVariant,
    design: SimulationDesign,
    n_replicates: int,
    master_seed: int,
    n_jobs: int = 1,
) -> list[TrialPairRecord]:
    """n_replicates independent pairs; results ordered by replicate index.

    Each replicate owns a seed derived from (master_seed, index), so the
    result set is identical whether run serially or across processes.
    """
    if n_replicates < 1:
        raise ConfigError("n_replicates must be >= 1")
    jobs = [(scenario, variant, design, master_seed, i) for i in range(n_replicates)]
    if n_jobs <= 1:
        return [_one_replicate(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_one_replicate, jobs, chunksize=1))


def audit_no_skipping(record: TrialRecord) -> bool:
    """True when every post-start cohort stays within one level of the
    highest dose already administered."""
    seen = -1
    for i, c in enumerate(record.cohorts):
        if i > 0 and c.dose_index > seen + 1:
            return False
        seen = max(seen, c.dose_index)
    return True


def audit_patient_conservation(record: TrialRecord, design: SimulationDesign) -> bool:
    n = record.n_patients
    if record.stopped_early:
        return n == design.cohort_size * len(record.cohorts) and n < design.max_sample_size
    return n + design.cohort_size > design.max_sample_size and n <= design.max_sample_size
