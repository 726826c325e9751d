"""End-to-end acceptance checks, one test per headline guarantee.

Each test measures one deliverable-level property and prints the measured
quantity next to its verdict.  The campaign-backed checks at the bottom run
200-replicate simulation studies at the reduced sampler budget and dominate
the suite's runtime; everything here is seeded, so outcomes are exact
reruns, not statistical retries.
"""

from __future__ import annotations

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import chisquare

import test_decisions
import test_model
from exbridge.betaess import beta_moment_match
from exbridge.cli import main, packaged_data_path
from exbridge.diagnostics import mc_ess
from exbridge.io import (
    default_app_config,
    load_animal_data,
    load_manifest,
    write_config,
    write_trial_state,
)
from exbridge.mcmc import (
    REDUCED_SETTINGS,
    SamplerSettings,
    prior_predictive,
    run_posterior,
    sample_mixture_indicator,
)
from exbridge.scenarios import SCENARIOS, AnalysisModelVariant
from exbridge.simulate import SimulationDesign, audit_no_skipping, run_campaign
from exbridge.types import (
    Cohort,
    DoseGrid,
    HumanTrialState,
    MixtureWeights,
    ModelConfig,
)
from oracles import grid_posterior_p_summary, mixture_indicator_probs
from tables import PRIOR_SUMMARY_ROWS

MASTER_SEED = 20260819
N_REPLICATES = 200
N_JOBS = 4


def _verdict(ok: bool, name: str, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def campaign_design():
    cfg = default_app_config()
    studies = load_animal_data(
        packaged_data_path("animal_studies.csv"), cfg.grid.reference_dose
    )
    return SimulationDesign(
        animal_studies=tuple(studies),
        model_config=cfg.model,
        grid=cfg.grid,
        thresholds=cfg.thresholds,
        sampler=REDUCED_SETTINGS,
        max_sample_size=cfg.max_sample_size,
        cohort_size=cfg.cohort_size,
    )


def test_tabulated_prior_summaries_rederive_within_half_unit():
    started = time.perf_counter()
    worst = 0.0
    for _stage, _subgroup, _dose, mean, sd, a, b, ess in PRIOR_SUMMARY_ROWS:
        approx = beta_moment_match(mean, sd)
        worst = max(worst, abs(approx.a - a), abs(approx.b - b), abs(approx.ess - ess))
    elapsed = time.perf_counter() - started
    _verdict(
        worst <= 0.5 and elapsed < 1.0,
        "prior-summary table rederivation",
        f"max |delta|={worst:.3f} over {len(PRIOR_SUMMARY_ROWS)} rows (limit 0.5), "
        f"{elapsed:.3f}s (limit 1s)",
    )


def test_reduced_model_posterior_matches_grid_integration():
    started = time.perf_counter()
    grid = DoseGrid(doses=(0.1, 0.5, 1.0, 5.0, 10.0, 20.0), reference_dose=5.0)
    cfg = default_app_config()
    model = ModelConfig(
        species=(),
        subgroups=("NEW",),
        hyper=cfg.model.hyper,
        translation=cfg.model.translation,
        weights={"NEW": MixtureWeights(species=(), human=0.0, robust=1.0)},
    )
    trial = HumanTrialState(
        subgroup_id="NEW",
        grid=grid,
        cohorts=tuple(Cohort(*c) for c in ((0, 3, 0), (1, 3, 0), (2, 3, 1), (3, 3, 2))),
        max_sample_size=24,
        cohort_size=3,
    )
    settings = SamplerSettings(
        n_iterations=REDUCED_SETTINGS.n_iterations,
        n_burnin=REDUCED_SETTINGS.n_burnin,
        fixed_blocks=("bridging",),
    )
    result = run_posterior([], [trial], model, settings)
    n_per, r_per = trial.dose_tallies()
    means, sds = grid_posterior_p_summary(grid.doses, grid.reference_dose, n_per, r_per)
    pooled = result.p_pooled("NEW")
    mean_err = float(np.max(np.abs(pooled.mean(axis=0) - means)))
    sd_err = float(np.max(np.abs(pooled.std(axis=0, ddof=1) - sds)))
    elapsed = time.perf_counter() - started
    _verdict(
        mean_err < 0.02 and sd_err < 0.03 and elapsed < 120.0,
        "grid-integration oracle equivalence",
        f"max mean err {mean_err:.4f} (limit 0.02), max sd err {sd_err:.4f} "
        f"(limit 0.03), {elapsed:.1f}s (limit 120s)",
    )


def test_indicator_draws_match_full_conditional_probabilities():
    rng = np.random.default_rng(2026)
    n_draws = 10_000
    worst_p = 1.0
    for case in range(20):
        components = [
            (
                tuple(rng.uniform(-1.5, 1.5, size=2)),
                (rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5)),
            )
            for _ in range(4)
        ]
        weights = tuple(rng.dirichlet(np.full(4, 4.0)))
        gamma = tuple(rng.uniform(-1.0, 1.0, size=2))
        probs = np.asarray(mixture_indicator_probs(gamma, components, weights))
        counts = np.bincount(
            [
                sample_mixture_indicator(gamma, components, weights, float(u))
                for u in rng.random(n_draws)
            ],
            minlength=4,
        )
        stat = chisquare(counts, f_exp=probs * n_draws)
        worst_p = min(worst_p, float(stat.pvalue))
        assert stat.pvalue > 0.001, f"case {case}: counts {counts} vs probs {probs}"
    _verdict(
        worst_p > 0.001,
        "indicator full-conditional fit",
        f"20 cases x {n_draws} draws, worst chi-square p={worst_p:.4f} (floor 0.001)",
    )


def test_subgroups_share_prior_predictive_before_human_data():
    cfg = default_app_config()
    studies = load_animal_data(
        packaged_data_path("animal_studies.csv"), cfg.grid.reference_dose
    )
    shared = cfg.model.weights_for("T1")
    model = ModelConfig(
        species=cfg.model.species,
        subgroups=("T1", "T2"),
        hyper=cfg.model.hyper,
        translation=cfg.model.translation,
        weights={"T1": shared, "T2": shared},
    )
    pred = prior_predictive(
        studies,
        model,
        REDUCED_SETTINGS,
        [cfg.empty_trial("T1"), cfg.empty_trial("T2")],
    )
    result = pred.result
    worst_ratio = 0.0
    for j in range(len(cfg.grid.doses)):
        a = result.p_draws["T1"][:, :, j]
        b = result.p_draws["T2"][:, :, j]
        se = a.std(ddof=1) / math.sqrt(mc_ess(a)) + b.std(ddof=1) / math.sqrt(mc_ess(b))
        worst_ratio = max(worst_ratio, abs(float(a.mean() - b.mean())) / (3.0 * se))
    _verdict(
        worst_ratio < 1.0,
        "prior symmetry across subgroups",
        f"worst |mean gap| / (3 MC SE) = {worst_ratio:.2f} (limit 1.0) across "
        f"{len(cfg.grid.doses)} doses",
    )


def test_manifest_rerun_is_bit_identical_for_fit_and_simulate(tmp_path):
    tiny = SamplerSettings(n_chains=2, n_iterations=600, n_burnin=200, seed=9)
    cfg_path = write_config(
        replace(default_app_config(), sampler=tiny, reduced_sampler=tiny),
        tmp_path / "cfg.json",
    )
    cfg = default_app_config()
    trial = HumanTrialState(
        subgroup_id="T1",
        grid=cfg.grid,
        cohorts=(Cohort(0, 3, 0),),
        max_sample_size=cfg.max_sample_size,
        cohort_size=cfg.cohort_size,
    )
    trial_path = write_trial_state(trial, tmp_path / "trial.json")

    runs = {
        "fit": [
            "fit", "--config", str(cfg_path), "--trial", str(trial_path),
            "--seed", "31", "--out", str(tmp_path / "fit1"),
        ],
        "simulate": [
            "simulate", "--config", str(cfg_path), "--scenario", "1",
            "--model-variant", "C", "--replicates", "2",
            "--seed", "33", "--out", str(tmp_path / "simulate1"),
        ],
    }
    mismatches = []
    for name, argv in runs.items():
        assert main(argv) == 0
        first = tmp_path / f"{name}1"
        second = tmp_path / f"{name}2"
        assert main(["rerun", "--manifest", str(first / "manifest.json"), "--out", str(second)]) == 0
        manifest = load_manifest(first / "manifest.json")
        for artifact in manifest.outputs:
            if (first / artifact).read_bytes() != (second / artifact).read_bytes():
                mismatches.append(f"{name}/{artifact}")
        if load_manifest(second / "manifest.json").outputs != manifest.outputs:
            mismatches.append(f"{name}/manifest digests")
    _verdict(
        not mismatches,
        "manifest rerun bit-identity",
        "fit and simulate reruns byte-equal" if not mismatches else f"diverged: {mismatches}",
    )


def test_invariant_property_suites_generate_enough_cases():
    suites = {
        "toxicity-curve monotonicity": (
            test_model.MONOTONE_CASES,
            test_model.TestToxProb.test_strictly_increasing_in_dose,
        ),
        "density relabeling symmetry": (
            test_model.RELABEL_CASES,
            test_model.TestLogJointDensity.test_relabeling_studies_within_species_changes_nothing,
        ),
        "interval normalization": (
            test_decisions.NORMALIZATION_CASES,
            test_decisions.TestIntervalProbabilities.test_generated_triples_normalize_and_match_direct_counts,
        ),
        "no-skipping rule": (
            test_decisions.NO_SKIP_CASES,
            test_decisions.TestRecommendNextDose.test_generated_recommendations_never_skip_and_match_the_rule,
        ),
        "declared dose was administered": (
            test_decisions.MTD_CASES,
            test_decisions.TestDeclareMtd.test_generated_mtds_are_administered_and_match_the_rule,
        ),
    }
    shortfalls = [name for name, (count, _fn) in suites.items() if count < 1000]
    detail = ", ".join(f"{name}={count}" for name, (count, _fn) in suites.items())
    _verdict(not shortfalls, "property-suite case budgets", detail)


def test_scenario1_borrowing_raises_t2_correct_selection_by_10_points(campaign_design):
    scenario = SCENARIOS["1"]
    target = scenario.target_dose["T2"]
    records = {
        tag: run_campaign(
            scenario,
            AnalysisModelVariant(tag),
            campaign_design,
            N_REPLICATES,
            MASTER_SEED,
            n_jobs=N_JOBS,
        )
        for tag in ("A", "D")
    }
    correct = {
        tag: np.array([rec.second.mtd_index == target for rec in recs], dtype=float)
        for tag, recs in records.items()
    }
    pcs_a = 100.0 * float(correct["A"].mean())
    pcs_d = 100.0 * float(correct["D"].mean())
    paired = correct["A"] - correct["D"]
    mc_se = 100.0 * float(paired.std(ddof=1)) / math.sqrt(N_REPLICATES)
    gap = pcs_a - pcs_d
    _verdict(
        gap >= 10.0,
        "borrowing benefit in second trial",
        f"PCS(T2) {pcs_a:.1f}% with human+animal co-data vs {pcs_d:.1f}% without "
        f"human borrowing; gap {gap:+.1f} points (need >= +10), paired MC SE {mc_se:.1f}",
    )


def test_scenario5_trials_end_safely_under_every_variant(campaign_design):
    scenario = SCENARIOS["5"]
    pct_by_tag = {}
    for tag in "ABCDE":
        records = run_campaign(
            scenario,
            AnalysisModelVariant(tag),
            campaign_design,
            N_REPLICATES,
            MASTER_SEED,
            n_jobs=N_JOBS,
        )
        safe = 0
        for rec in records:
            for trial_record in (rec.first, rec.second):
                audit_no_skipping(trial_record)
            t2 = rec.second
            if t2.stopped_early or t2.mtd_index is None or t2.mtd_index == 0:
                safe += 1
        pct_by_tag[tag] = 100.0 * safe / len(records)
    detail = ", ".join(f"{tag}={pct:.1f}%" for tag, pct in pct_by_tag.items())
    _verdict(
        min(pct_by_tag.values()) >= 80.0,
        "overdose scenario ends safely",
        f"T2 stopped early or kept MTD at lowest dose: {detail} (floor 80%), "
        "no-skipping audit clean on every trajectory",
    )


def test_bridging_factor_directionality_in_scenarios_4_and_2(campaign_design):
    def completed_means(records):
        means = {}
        for name, pick in (("T1", lambda r: r.first), ("T2", lambda r: r.second)):
            values = [
                pick(r).bridging_mean
                for r in records
                if not pick(r).stopped_early and pick(r).bridging_mean is not None
            ]
            means[name] = float(np.mean(values))
        return means

    campaigns = {
        name: completed_means(
            run_campaign(
                SCENARIOS[name],
                AnalysisModelVariant("A"),
                campaign_design,
                N_REPLICATES,
                MASTER_SEED,
                n_jobs=N_JOBS,
            )
        )
        for name in ("4", "2")
    }
    below_prior_center = campaigns["4"]["T1"] < 1.0 and campaigns["4"]["T2"] < 1.0
    second_above_first = campaigns["2"]["T2"] > campaigns["2"]["T1"]
    _verdict(
        below_prior_center and second_above_first,
        "dose-scale factor directionality",
        f"low-toxicity truth pulls both subgroups below the prior center "
        f"(T1 {campaigns['4']['T1']:.3f}, T2 {campaigns['4']['T2']:.3f}, need < 1); "
        f"hotter second trial sits above its first "
        f"(T2 {campaigns['2']['T2']:.3f} > T1 {campaigns['2']['T1']:.3f})",
    )
