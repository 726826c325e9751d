"""Stock simulation scenarios and the five analysis-variant descriptors."""

import pytest

from exbridge.errors import ConfigError
from exbridge.scenarios import (
    SCENARIOS,
    TRIAL_1,
    TRIAL_2,
    VARIANT_TAGS,
    AnalysisModelVariant,
    ScenarioSpec,
)

# (scenario, trial) -> (true risks on the 6-dose grid, target index or None)
TRUTH = {
    ("1", TRIAL_1): ((0.01, 0.03, 0.10, 0.25, 0.34, 0.47), 3),
    ("1", TRIAL_2): ((0.01, 0.03, 0.10, 0.25, 0.34, 0.47), 3),
    ("2", TRIAL_1): ((0.01, 0.03, 0.10, 0.25, 0.34, 0.47), 3),
    ("2", TRIAL_2): ((0.05, 0.12, 0.25, 0.37, 0.50, 0.60), 2),
    ("3", TRIAL_1): ((0.01, 0.03, 0.10, 0.25, 0.34, 0.47), 3),
    ("3", TRIAL_2): ((0.01, 0.03, 0.07, 0.15, 0.25, 0.37), 4),
    ("4", TRIAL_1): ((0.01, 0.03, 0.05, 0.08, 0.15, 0.25), 5),
    ("4", TRIAL_2): ((0.02, 0.05, 0.07, 0.12, 0.25, 0.36), 4),
    ("5", TRIAL_1): ((0.25, 0.34, 0.47, 0.55, 0.65, 0.75), 0),
    ("5", TRIAL_2): ((0.40, 0.50, 0.60, 0.70, 0.80, 0.90), None),
    ("6", TRIAL_1): ((0.01, 0.03, 0.05, 0.08, 0.15, 0.25), 5),
    ("6", TRIAL_2): ((0.10, 0.25, 0.36, 0.50, 0.60, 0.68), 1),
}


class TestStockScenarios:
    def test_exactly_six_scenarios(self):
        assert sorted(SCENARIOS) == ["1", "2", "3", "4", "5", "6"]

    @pytest.mark.parametrize("name", sorted(SCENARIOS))
    def test_tabulated_risks_and_targets(self, name):
        sc = SCENARIOS[name]
        for trial in (TRIAL_1, TRIAL_2):
            risks, target = TRUTH[(name, trial)]
            assert sc.true_tox[trial] == risks
            assert sc.target_dose[trial] == target

    @pytest.mark.parametrize("name", sorted(SCENARIOS))
    def test_target_doses_carry_risk_at_the_target_rate(self, name):
        sc = SCENARIOS[name]
        for trial, idx in sc.target_dose.items():
            if idx is not None:
                assert sc.true_tox[trial][idx] == 0.25

    def test_only_the_overdosed_trial_lacks_a_target(self):
        missing = [
            (name, trial)
            for name, sc in SCENARIOS.items()
            for trial, idx in sc.target_dose.items()
            if idx is None
        ]
        assert missing == [("5", TRIAL_2)]
        assert min(SCENARIOS["5"].true_tox[TRIAL_2]) >= 0.40


class TestScenarioValidation:
    def test_rejects_decreasing_risks(self):
        with pytest.raises(ConfigError):
            ScenarioSpec(
                name="bad",
                true_tox={TRIAL_1: (0.2, 0.1)},
                target_dose={TRIAL_1: 0},
            )

    def test_rejects_risks_outside_the_open_unit_interval(self):
        for probs in ((0.0, 0.2), (0.5, 1.0)):
            with pytest.raises(ConfigError):
                ScenarioSpec(
                    name="bad",
                    true_tox={TRIAL_1: probs},
                    target_dose={TRIAL_1: None},
                )

    def test_rejects_target_index_off_the_grid(self):
        with pytest.raises(ConfigError):
            ScenarioSpec(
                name="bad",
                true_tox={TRIAL_1: (0.1, 0.25)},
                target_dose={TRIAL_1: 2},
            )

    def test_ties_are_allowed(self):
        spec = ScenarioSpec(
            name="flat",
            true_tox={TRIAL_1: (0.25, 0.25)},
            target_dose={TRIAL_1: 0},
        )
        assert spec.true_tox[TRIAL_1] == (0.25, 0.25)


class TestAnalysisModelVariant:
    def test_the_five_tags(self):
        assert VARIANT_TAGS == ("A", "B", "C", "D", "E")

    def test_animal_data_usage(self):
        assert {t: AnalysisModelVariant(t).uses_animal_data for t in VARIANT_TAGS} == {
            "A": True,
            "B": False,
            "C": False,
            "D": True,
            "E": False,
        }

    def test_which_second_trials_see_the_first(self):
        assert {
            t: AnalysisModelVariant(t).second_trial_sees_first for t in VARIANT_TAGS
        } == {"A": True, "B": True, "C": False, "D": False, "E": True}

    def test_unknown_tag_is_rejected(self):
        with pytest.raises(ConfigError):
            AnalysisModelVariant("F")

    def test_robust_weight_only_for_the_exchangeable_variant(self):
        assert AnalysisModelVariant("B", robust_weight=0.2).robust_weight == 0.2
        with pytest.raises(ConfigError):
            AnalysisModelVariant("A", robust_weight=0.2)
        with pytest.raises(ConfigError):
            AnalysisModelVariant("B", robust_weight=1.0)
        with pytest.raises(ConfigError):
            AnalysisModelVariant("B", robust_weight=-0.1)
