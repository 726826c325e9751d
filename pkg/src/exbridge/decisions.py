"""Escalation decisions computed from posterior toxicity draws.

Every rule here is a pure function of a draw matrix (draws x doses) and the
accrued trial state.  Doses are classified by three intervals of DLT risk:
underdosing below underdose_cut, the target band [underdose_cut,
overdose_cut), and overdosing at or above overdose_cut.  A dose is
admissible while its posterior overdosing probability stays at or below the
feasibility bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, StateError
from .mcmc import PosteriorResult
from .types import HumanTrialState

DECISION_KINDS = ("start", "escalate_to", "stay", "de_escalate_to", "stop_for_safety", "complete")
_DOSING_KINDS = frozenset({"start", "escalate_to", "stay", "de_escalate_to"})


@dataclass(frozen=True)
class IntervalThresholds:
    underdose_cut: float = 0.16
    overdose_cut: float = 0.33
    target: float = 0.25
    feasibility_bound: float = 0.25
    start_confidence: float = 0.85

    def __post_init__(self):
        if not 0.0 < self.underdose_cut < self.overdose_cut < 1.0:
            raise ConfigError("need 0 < underdose_cut < overdose_cut < 1")
        if not self.underdose_cut <= self.target < self.overdose_cut:
            raise ConfigError("target must lie in [underdose_cut, overdose_cut)")
        if not 0.0 < self.feasibility_bound < 1.0:
            raise ConfigError("feasibility_bound must be a probability")
        if not 0.0 < self.start_confidence < 1.0:
            raise ConfigError("start_confidence must be a probability")


@dataclass(frozen=True)
class DoseDecision:
    """One decision plus the per-dose interval probabilities that drove it."""

    kind: str
    dose_index: int | None
    rationale: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if self.kind not in DECISION_KINDS:
            raise ConfigError(f"unknown decision kind {self.kind!r}")
        if (self.dose_index is not None) != (self.kind in _DOSING_KINDS):
            raise ConfigError(f"dose_index must be present iff kind is a dosing action, got {self}")


def _draws_matrix(posterior, subgroup: str | None, n_doses: int | None) -> np.ndarray:
    if isinstance(posterior, PosteriorResult):
        if subgroup is None:
            if len(posterior.subgroups) != 1:
                raise ConfigError("subgroup must be named for a multi-subgroup posterior")
            subgroup = posterior.subgroups[0]
        m = posterior.p_pooled(subgroup)
    else:
        m = np.asarray(posterior, dtype=float)
    if m.ndim != 2 or m.shape[0] == 0:
        raise DataError(f"need a non-empty (draws, doses) matrix, got shape {m.shape}")
    if n_doses is not None and m.shape[1] != n_doses:
        raise ConfigError(f"posterior covers {m.shape[1]} doses, trial grid has {n_doses}")
    return m


def interval_probabilities(
    draws: Sequence[float] | np.ndarray, thresholds: IntervalThresholds
) -> tuple[float, float, float]:
    """(P_under, P_target, P_over) as empirical frequencies; sums to 1 exactly.

    The boundary draws follow the half-open bands: a draw equal to
    underdose_cut counts as target, one equal to overdose_cut as over.
    """
    arr = np.asarray(draws, dtype=float).reshape(-1)
    if arr.size == 0:
        raise DataError("empty draw set")
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DataError("toxicity draws must lie in (0, 1)")
    n = arr.size
    under = float(np.count_nonzero(arr < thresholds.underdose_cut)) / n
    target = float(np.count_nonzero((arr >= thresholds.underdose_cut) & (arr < thresholds.overdose_cut))) / n
    over = 1.0 - (under + target)
    return under, target, over


def dose_interval_table(
    p_draws: np.ndarray, thresholds: IntervalThresholds
) -> tuple[tuple[float, float, float], ...]:
    m = _draws_matrix(p_draws, None, None)
    return tuple(interval_probabilities(m[:, j], thresholds) for j in range(m.shape[1]))


def starting_dose(
    posterior, thresholds: IntervalThresholds, subgroup: str | None = None
) -> DoseDecision:
    """Highest dose confidently below the underdose cut, else the lowest dose.

    Confidence means P(p < underdose_cut) > start_confidence under the prior
    or co-data posterior supplied.
    """
    m = _draws_matrix(posterior, subgroup, None)
    table = dose_interval_table(m, thresholds)
    qualified = [j for j, (under, _, _) in enumerate(table) if under > thresholds.start_confidence]
    return DoseDecision(kind="start", dose_index=max(qualified) if qualified else 0, rationale=table)


def recommend_next_dose(
    posterior,
    trial: HumanTrialState,
    thresholds: IntervalThresholds,
    no_skipping: bool = True,
) -> DoseDecision:
    """The next-cohort dose per the overdose-control rule.

    Picks the highest admissible dose (P_over <= feasibility_bound), capped,
    when no_skipping is set, at one level above the highest dose given so
    far.  De-escalation is never capped.  No admissible dose means stop;
    a full trial means complete.
    """
    if not trial.cohorts:
        raise StateError("trial has no cohorts yet; use starting_dose")
    m = _draws_matrix(posterior, trial.subgroup_id if isinstance(posterior, PosteriorResult) else None,
                      len(trial.grid))
    table = dose_interval_table(m, thresholds)
    if trial.is_full:
        return DoseDecision(kind="complete", dose_index=None, rationale=table)
    admissible = [j for j, (_, _, over) in enumerate(table) if over <= thresholds.feasibility_bound]
    if not admissible:
        return DoseDecision(kind="stop_for_safety", dose_index=None, rationale=table)
    best = max(admissible)
    if no_skipping:
        highest = trial.highest_administered()
        assert highest is not None
        best = min(best, highest + 1)
    current = trial.cohorts[-1].dose_index
    if best > current:
        kind = "escalate_to"
    elif best == current:
        kind = "stay"
    else:
        kind = "de_escalate_to"
    return DoseDecision(kind=kind, dose_index=best, rationale=table)


def declare_mtd(
    posterior, trial: HumanTrialState, thresholds: IntervalThresholds
) -> int | None:
    """Final MTD for a completed trial: the administered, admissible dose
    whose posterior median DLT risk sits closest to the target, ties going
    to the lower dose.  None when no administered dose is admissible.
    """
    if not trial.is_full:
        raise StateError(
            f"trial has {trial.n_enrolled}/{trial.max_sample_size} patients; MTD needs a completed trial"
        )
    m = _draws_matrix(posterior, trial.subgroup_id if isinstance(posterior, PosteriorResult) else None,
                      len(trial.grid))
    table = dose_interval_table(m, thresholds)
    medians = np.median(m, axis=0)
    candidates = [
        j
        for j in trial.administered_indices()
        if table[j][2] <= thresholds.feasibility_bound
    ]
    if not candidates:
        return None
    return min(candidates, key=lambda j: (abs(float(medians[j]) - thresholds.target), j))
