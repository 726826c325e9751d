"""Decision-rule contracts: interval classification, dose recommendation, MTD.

The generated suites re-derive every decision from the documented rule using
only interval_probabilities (itself checked against direct counting), so a
bookkeeping slip in the cap, the admissibility filter, or the tie-break shows
up as a disagreement rather than a missed edge case.
"""

import numpy as np
import pytest

from exbridge.decisions import (
    DECISION_KINDS,
    DoseDecision,
    IntervalThresholds,
    declare_mtd,
    dose_interval_table,
    interval_probabilities,
    recommend_next_dose,
    starting_dose,
)
from exbridge.errors import ConfigError, DataError, StateError
from exbridge.types import Cohort, DoseGrid, HumanTrialState

# generated-case budgets for the property suites (kept >= 1000 by contract)
NORMALIZATION_CASES = 1500
NO_SKIP_CASES = 1200
MTD_CASES = 1200

THRESHOLDS = IntervalThresholds()

GRID6 = DoseGrid(doses=(0.1, 0.5, 1.0, 5.0, 10.0, 20.0), reference_dose=5.0)


def _trial(cohorts, n_doses=6, max_sample_size=200, cohort_size=3):
    doses = tuple(float(2**j) for j in range(n_doses))
    return HumanTrialState(
        subgroup_id="T1",
        grid=DoseGrid(doses=doses, reference_dose=doses[-1]),
        cohorts=tuple(Cohort(d, n, r) for d, n, r in cohorts),
        max_sample_size=max_sample_size,
        cohort_size=cohort_size,
    )


def _constant_columns(values, n_draws=200):
    """Draw matrix whose column j is the constant values[j]."""
    return np.tile(np.asarray(values, dtype=float), (n_draws, 1))


def _random_matrix(rng, n_draws, n_doses):
    """Plausible toxicity draws: per-draw monotone in dose, spread over (0, 1)."""
    base = rng.beta(rng.uniform(0.4, 3.0), rng.uniform(0.4, 3.0), size=(n_draws, n_doses))
    return np.sort(np.clip(base, 1e-9, 1.0 - 1e-9), axis=1)


class TestIntervalProbabilities:
    def test_hand_counted_vector(self):
        draws = [0.05, 0.16, 0.20, 0.33, 0.50, 0.10]
        under, target, over = interval_probabilities(draws, THRESHOLDS)
        assert under == pytest.approx(2 / 6)
        assert target == pytest.approx(2 / 6)
        assert over == pytest.approx(2 / 6)

    def test_cut_points_belong_to_the_upper_band(self):
        assert interval_probabilities([0.16] * 4, THRESHOLDS) == (0.0, 1.0, 0.0)
        assert interval_probabilities([0.33] * 4, THRESHOLDS) == (0.0, 0.0, 1.0)

    def test_generated_triples_normalize_and_match_direct_counts(self):
        rng = np.random.default_rng(41)
        for _ in range(NORMALIZATION_CASES):
            n = int(rng.integers(1, 200))
            draws = _random_matrix(rng, n, 1)[:, 0]
            cuts = IntervalThresholds(
                underdose_cut=float(rng.uniform(0.05, 0.4)),
                overdose_cut=float(rng.uniform(0.45, 0.9)),
                target=float(rng.uniform(0.4, 0.44)),
            )
            under, target, over = interval_probabilities(draws, cuts)
            assert under + target + over == 1.0
            assert under >= 0.0 and target >= 0.0 and over >= 0.0
            assert under == sum(1 for x in draws if x < cuts.underdose_cut) / n
            assert target == sum(1 for x in draws if cuts.underdose_cut <= x < cuts.overdose_cut) / n
            shuffled = rng.permutation(draws)
            assert interval_probabilities(shuffled, cuts) == (under, target, over)

    def test_rejects_empty_and_out_of_range_draws(self):
        with pytest.raises(DataError):
            interval_probabilities([], THRESHOLDS)
        for bad in (0.0, 1.0, -0.2, 1.7, float("nan")):
            with pytest.raises(DataError):
                interval_probabilities([0.2, bad], THRESHOLDS)

    def test_table_applies_the_rule_per_column(self):
        rng = np.random.default_rng(7)
        m = _random_matrix(rng, 80, 5)
        table = dose_interval_table(m, THRESHOLDS)
        assert len(table) == 5
        for j, triple in enumerate(table):
            assert triple == interval_probabilities(m[:, j], THRESHOLDS)

    def test_table_rejects_wrong_shapes(self):
        with pytest.raises(DataError):
            dose_interval_table(np.array([0.1, 0.2, 0.3]), THRESHOLDS)
        with pytest.raises(DataError):
            dose_interval_table(np.empty((0, 4)), THRESHOLDS)


class TestThresholdAndDecisionValidation:
    def test_threshold_orderings_are_enforced(self):
        with pytest.raises(ConfigError):
            IntervalThresholds(underdose_cut=0.4, overdose_cut=0.3)
        with pytest.raises(ConfigError):
            IntervalThresholds(target=0.5)
        with pytest.raises(ConfigError):
            IntervalThresholds(target=0.1)
        with pytest.raises(ConfigError):
            IntervalThresholds(feasibility_bound=0.0)
        with pytest.raises(ConfigError):
            IntervalThresholds(start_confidence=1.0)

    def test_decision_kind_and_index_must_agree(self):
        rationale = ((0.5, 0.3, 0.2),)
        with pytest.raises(ConfigError):
            DoseDecision(kind="undiscovered", dose_index=0, rationale=rationale)
        with pytest.raises(ConfigError):
            DoseDecision(kind="escalate_to", dose_index=None, rationale=rationale)
        with pytest.raises(ConfigError):
            DoseDecision(kind="complete", dose_index=2, rationale=rationale)


class TestStartingDose:
    def test_picks_highest_confidently_safe_dose(self):
        # column under-probabilities 1.0, 0.92, 0.80, 0.0 (n = 50 draws)
        cols = np.column_stack(
            [
                np.full(50, 0.05),
                np.concatenate([np.full(46, 0.05), np.full(4, 0.5)]),
                np.concatenate([np.full(40, 0.05), np.full(10, 0.5)]),
                np.full(50, 0.5),
            ]
        )
        decision = starting_dose(cols, THRESHOLDS)
        assert decision.kind == "start"
        assert decision.dose_index == 1
        assert decision.rationale == dose_interval_table(cols, THRESHOLDS)

    def test_confidence_exactly_at_the_bar_does_not_qualify(self):
        col = np.concatenate([np.full(17, 0.05), np.full(3, 0.5)])  # under = 0.85
        assert starting_dose(col[:, None], THRESHOLDS).dose_index == 0

    def test_defaults_to_lowest_dose_when_nothing_qualifies(self):
        m = _constant_columns([0.3, 0.4, 0.5])
        assert starting_dose(m, THRESHOLDS).dose_index == 0

    def test_generated_starts_match_the_documented_rule(self):
        rng = np.random.default_rng(42)
        for _ in range(400):
            m = _random_matrix(rng, int(rng.integers(20, 120)), int(rng.integers(2, 7)))
            decision = starting_dose(m, THRESHOLDS)
            qualified = [
                j
                for j in range(m.shape[1])
                if interval_probabilities(m[:, j], THRESHOLDS)[0] > THRESHOLDS.start_confidence
            ]
            assert decision.dose_index == (max(qualified) if qualified else 0)


class TestRecommendNextDose:
    def test_requires_at_least_one_cohort(self):
        with pytest.raises(StateError):
            recommend_next_dose(_constant_columns([0.1] * 6), _trial([]), THRESHOLDS)

    def test_full_trial_completes(self):
        trial = _trial([(0, 3, 0), (1, 3, 1)], max_sample_size=6)
        assert trial.is_full
        decision = recommend_next_dose(_constant_columns([0.1] * 6), trial, THRESHOLDS)
        assert decision.kind == "complete"
        assert decision.dose_index is None

    def test_stops_when_no_dose_is_admissible(self):
        trial = _trial([(0, 3, 2)])
        decision = recommend_next_dose(_constant_columns([0.9] * 6), trial, THRESHOLDS)
        assert decision.kind == "stop_for_safety"
        assert decision.dose_index is None

    def test_no_skipping_caps_escalation_to_one_level(self):
        trial = _trial([(0, 3, 0)])
        m = _constant_columns([0.05, 0.08, 0.12, 0.20, 0.40, 0.60])
        capped = recommend_next_dose(m, trial, THRESHOLDS)
        assert (capped.kind, capped.dose_index) == ("escalate_to", 1)
        free = recommend_next_dose(m, trial, THRESHOLDS, no_skipping=False)
        assert (free.kind, free.dose_index) == ("escalate_to", 3)

    def test_stays_when_current_dose_is_the_best_admissible(self):
        trial = _trial([(0, 3, 0), (1, 3, 1)])
        m = _constant_columns([0.05, 0.20, 0.40, 0.60, 0.7, 0.8])
        decision = recommend_next_dose(m, trial, THRESHOLDS)
        assert (decision.kind, decision.dose_index) == ("stay", 1)

    def test_de_escalation_is_not_capped(self):
        trial = _trial([(0, 3, 0), (1, 3, 0), (2, 3, 0), (3, 3, 2)])
        m = _constant_columns([0.05, 0.20, 0.40, 0.60, 0.7, 0.8])
        decision = recommend_next_dose(m, trial, THRESHOLDS)
        assert (decision.kind, decision.dose_index) == ("de_escalate_to", 1)

    def test_posterior_must_cover_the_trial_grid(self):
        with pytest.raises(ConfigError):
            recommend_next_dose(_constant_columns([0.1] * 4), _trial([(0, 3, 0)]), THRESHOLDS)

    def test_generated_recommendations_never_skip_and_match_the_rule(self):
        rng = np.random.default_rng(43)
        capped_escalations = 0
        for case in range(NO_SKIP_CASES):
            n_doses = int(rng.integers(3, 8))
            n_cohorts = int(rng.integers(1, 7))
            if case % 2:
                # low starts with a cool posterior, so the one-level cap binds
                idx = rng.integers(0, 2, size=n_cohorts)
                m = _random_matrix(rng, int(rng.integers(30, 90)), n_doses) * 0.3
            else:
                idx = rng.integers(0, n_doses, size=n_cohorts)
                m = _random_matrix(rng, int(rng.integers(30, 90)), n_doses)
            trial = _trial(
                [(int(j), 3, int(rng.integers(0, 4))) for j in idx], n_doses=n_doses
            )
            decision = recommend_next_dose(m, trial, THRESHOLDS)

            table = dose_interval_table(m, THRESHOLDS)
            assert decision.rationale == table
            admissible = [
                j for j in range(n_doses) if table[j][2] <= THRESHOLDS.feasibility_bound
            ]
            highest = max(int(j) for j in idx)
            if decision.kind == "stop_for_safety":
                assert not admissible
                continue
            assert decision.kind in DECISION_KINDS
            expected = min(max(admissible), highest + 1)
            assert decision.dose_index == expected
            assert table[decision.dose_index][2] <= THRESHOLDS.feasibility_bound
            assert decision.dose_index <= highest + 1
            current = trial.cohorts[-1].dose_index
            if decision.dose_index > current:
                assert decision.kind == "escalate_to"
            elif decision.dose_index == current:
                assert decision.kind == "stay"
            else:
                assert decision.kind == "de_escalate_to"
            if max(admissible) > highest + 1:
                capped_escalations += 1
        assert capped_escalations > 50  # the cap must actually bind sometimes

    def test_uncapped_recommendations_take_the_best_admissible_dose(self):
        rng = np.random.default_rng(44)
        for _ in range(300):
            n_doses = int(rng.integers(3, 8))
            trial = _trial([(0, 3, 0)], n_doses=n_doses)
            m = _random_matrix(rng, 60, n_doses)
            decision = recommend_next_dose(m, trial, THRESHOLDS, no_skipping=False)
            table = dose_interval_table(m, THRESHOLDS)
            admissible = [
                j for j in range(n_doses) if table[j][2] <= THRESHOLDS.feasibility_bound
            ]
            if decision.kind == "stop_for_safety":
                assert not admissible
            else:
                assert decision.dose_index == max(admissible)


class TestDeclareMtd:
    def test_requires_a_completed_trial(self):
        with pytest.raises(StateError):
            declare_mtd(_constant_columns([0.1] * 6), _trial([(0, 3, 0)]), THRESHOLDS)

    def test_none_when_every_administered_dose_is_inadmissible(self):
        trial = _trial([(0, 3, 2), (1, 3, 3)], max_sample_size=6)
        m = _constant_columns([0.6, 0.7, 0.1, 0.1, 0.1, 0.1])
        assert declare_mtd(m, trial, THRESHOLDS) is None

    def test_ties_go_to_the_lower_dose(self):
        trial = _trial([(0, 3, 0), (1, 3, 1), (2, 3, 1)], max_sample_size=9)
        # medians sit 0.03125 below and above the target, exactly
        m = _constant_columns([0.05, 0.21875, 0.28125, 0.5, 0.6, 0.7])
        assert declare_mtd(m, trial, THRESHOLDS) == 1

    def test_unadministered_doses_never_win(self):
        trial = _trial([(0, 3, 0), (1, 3, 0)], max_sample_size=6)
        m = _constant_columns([0.05, 0.10, 0.24, 0.9, 0.9, 0.9])
        assert declare_mtd(m, trial, THRESHOLDS) == 1

    def test_generated_mtds_are_administered_and_match_the_rule(self):
        rng = np.random.default_rng(45)
        declared = 0
        for _ in range(MTD_CASES):
            n_doses = int(rng.integers(3, 8))
            n_cohorts = int(rng.integers(1, 7))
            idx = [int(j) for j in rng.integers(0, n_doses, size=n_cohorts)]
            trial = _trial(
                [(j, 3, int(rng.integers(0, 4))) for j in idx],
                n_doses=n_doses,
                max_sample_size=3 * n_cohorts,
            )
            assert trial.is_full
            m = _random_matrix(rng, int(rng.integers(30, 90)), n_doses)
            mtd = declare_mtd(m, trial, THRESHOLDS)

            table = dose_interval_table(m, THRESHOLDS)
            medians = np.median(m, axis=0)
            expected = None
            for j in sorted(set(idx)):
                if table[j][2] > THRESHOLDS.feasibility_bound:
                    continue
                if expected is None or abs(medians[j] - THRESHOLDS.target) < abs(
                    medians[expected] - THRESHOLDS.target
                ):
                    expected = j
            assert mtd == expected
            if mtd is not None:
                declared += 1
                assert mtd in trial.administered_indices()
        assert declared > 200  # the sweep must exercise real declarations
