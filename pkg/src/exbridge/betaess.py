"""Beta moment matching and prior effective sample sizes.

A (mean, sd) summary of a DLT-risk distribution is matched to the Beta(a, b)
with the same first two moments; a + b is then the effective sample size:
how many patients' worth of information the summarized prior carries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import ConfigError, InfeasibleBetaError


@dataclass(frozen=True)
class BetaApprox:
    a: float
    b: float
    source_mean: float
    source_sd: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ConfigError(f"beta parameters must be positive, got a={self.a}, b={self.b}")
        if abs(self.mean - self.source_mean) > 1e-12:
            raise ConfigError(
                f"implied mean {self.mean} does not match source mean {self.source_mean}"
            )

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    @property
    def sd(self) -> float:
        n = self.a + self.b
        return math.sqrt(self.a * self.b / (n * n * (n + 1.0)))

    @property
    def ess(self) -> float:
        return self.a + self.b


def beta_moment_match(mean: float, sd: float) -> BetaApprox:
    """Beta(a, b) with the given mean and sd.

    Solving the moment equations gives a = mean*nu and b = (1-mean)*nu with
    nu = mean*(1-mean)/sd^2 - 1, which requires sd^2 < mean*(1-mean).
    """
    if not 0.0 < mean < 1.0:
        raise ConfigError(f"mean must lie in (0, 1), got {mean}")
    if not sd > 0.0:
        raise ConfigError(f"sd must be positive, got {sd}")
    if sd * sd >= mean * (1.0 - mean):
        raise InfeasibleBetaError(mean, sd)
    nu = mean * (1.0 - mean) / (sd * sd) - 1.0
    return BetaApprox(a=mean * nu, b=(1.0 - mean) * nu, source_mean=mean, source_sd=sd)


@dataclass(frozen=True)
class EssRow:
    """One report line; a/b/ess are None when no matching beta exists."""

    subgroup: str
    dose: float
    mean: float
    sd: float
    a: float | None
    b: float | None
    ess: float | None
    infeasible: bool


def ess_report(summaries: Iterable) -> tuple[EssRow, ...]:
    """ESS table from per-dose summaries (anything with subgroup/dose/mean/sd).

    Infeasible (mean, sd) pairs become flagged rows instead of failing the
    whole table.
    """
    rows = []
    for s in summaries:
        mean, sd = float(s.mean), float(s.sd)
        try:
            approx = beta_moment_match(mean, sd)
        except InfeasibleBetaError:
            rows.append(
                EssRow(
                    subgroup=s.subgroup, dose=float(s.dose), mean=mean, sd=sd,
                    a=None, b=None, ess=None, infeasible=True,
                )
            )
            continue
        rows.append(
            EssRow(
                subgroup=s.subgroup, dose=float(s.dose), mean=mean, sd=sd,
                a=approx.a, b=approx.b, ess=approx.ess, infeasible=False,
            )
        )
    return tuple(rows)
