"""Simulation truth tables and analysis-model variants.

The six stock scenarios give true per-dose DLT risks for the two sequential
trials on the shared six-dose grid; the target dose of each vector is the
one with true risk exactly at the 25% target (absent in scenario 5's second
trial, where every dose is too toxic).

Variants A-E differ in what co-data the analyses borrow:
  A  animal data plus, for the second trial, the first trial's outcomes
     through both the species populations and the cross-subgroup component;
  B  human data only, subgroup curves fully exchangeable;
  C  fully independent analyses, no borrowing at all;
  D  animal data only, each trial analyzed separately;
  E  no animal data; the second trial simply pools the first trial's
     cohorts into its own likelihood (shared curve and scale factor).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import ConfigError

TRIAL_1 = "T1"
TRIAL_2 = "T2"


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    true_tox: Mapping[str, tuple[float, ...]]
    target_dose: Mapping[str, int | None]  # index of the dose to be selected, if any

    def __post_init__(self):
        object.__setattr__(self, "true_tox", dict(self.true_tox))
        object.__setattr__(self, "target_dose", dict(self.target_dose))
        for sub, probs in self.true_tox.items():
            if not all(0.0 < p < 1.0 for p in probs):
                raise ConfigError(f"scenario {self.name}, {sub}: risks must lie in (0,1)")
            if any(a > b for a, b in zip(probs, probs[1:])):
                raise ConfigError(f"scenario {self.name}, {sub}: risks must be non-decreasing")
        for sub, idx in self.target_dose.items():
            if idx is not None and not 0 <= idx < len(self.true_tox[sub]):
                raise ConfigError(f"scenario {self.name}, {sub}: target dose index out of range")


def _scenario(name, t1, t1_mtd, t2, t2_mtd):
    return ScenarioSpec(
        name=name,
        true_tox={TRIAL_1: t1, TRIAL_2: t2},
        target_dose={TRIAL_1: t1_mtd, TRIAL_2: t2_mtd},
    )


SCENARIOS: dict[str, ScenarioSpec] = {
    "1": _scenario(
        "1",
        (0.01, 0.03, 0.10, 0.25, 0.34, 0.47), 3,
        (0.01, 0.03, 0.10, 0.25, 0.34, 0.47), 3,
    ),
    "2": _scenario(
        "2",
        (0.01, 0.03, 0.10, 0.25, 0.34, 0.47), 3,
        (0.05, 0.12, 0.25, 0.37, 0.50, 0.60), 2,
    ),
    "3": _scenario(
        "3",
        (0.01, 0.03, 0.10, 0.25, 0.34, 0.47), 3,
        (0.01, 0.03, 0.07, 0.15, 0.25, 0.37), 4,
    ),
    "4": _scenario(
        "4",
        (0.01, 0.03, 0.05, 0.08, 0.15, 0.25), 5,
        (0.02, 0.05, 0.07, 0.12, 0.25, 0.36), 4,
    ),
    "5": _scenario(
        "5",
        (0.25, 0.34, 0.47, 0.55, 0.65, 0.75), 0,
        (0.40, 0.50, 0.60, 0.70, 0.80, 0.90), None,
    ),
    "6": _scenario(
        "6",
        (0.01, 0.03, 0.05, 0.08, 0.15, 0.25), 5,
        (0.10, 0.25, 0.36, 0.50, 0.60, 0.68), 1,
    ),
}

VARIANT_TAGS = ("A", "B", "C", "D", "E")


@dataclass(frozen=True)
class AnalysisModelVariant:
    """One of the five borrowing structures, keyed by its tag.

    robust_weight only affects variant B, where it peels mass off the
    exchangeable component onto the stand-alone one (0 reproduces plain B).
    """

    tag: str
    robust_weight: float = 0.0

    def __post_init__(self):
        if self.tag not in VARIANT_TAGS:
            raise ConfigError(f"unknown model variant {self.tag!r}; valid: {VARIANT_TAGS}")
        if not 0.0 <= self.robust_weight < 1.0:
            raise ConfigError("robust_weight must lie in [0, 1)")
        if self.robust_weight and self.tag != "B":
            raise ConfigError("robust_weight is only meaningful for variant B")

    @property
    def uses_animal_data(self) -> bool:
        return self.tag in ("A", "D")

    @property
    def second_trial_sees_first(self) -> bool:
        """Does the second trial's analysis condition on the first trial's data?"""
        return self.tag in ("A", "B", "E")

    @property
    def pools_first_trial(self) -> bool:
        return self.tag == "E"

    @property
    def informed_start(self) -> bool:
        """Second trial picks its starting dose from co-data (else lowest dose)."""
        return self.tag in ("A", "B", "E")
