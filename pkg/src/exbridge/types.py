"""Domain types for the borrowing model.

All types here are plain frozen dataclasses validated on construction.
Arrays handed in are copied and marked read-only, so instances can be shared
freely between the sampler, the decision layer and the service without
defensive copies.

Conventions used throughout the package:

* A dose-toxicity curve is ``logit(p) = a + exp(b) * log(s * d / d_ref)``
  where ``a`` is the intercept, ``b`` the log-slope, ``s`` a positive scale
  applied to the dose (interspecies allometric factor for animal studies,
  bridging factor for human subgroups) and ``d_ref`` the common reference
  dose.  The exponential keeps the slope positive, so curves are increasing
  in dose.
* 2x2 covariance matrices are carried as (sd_1, sd_2, correlation) triples.
* Mixture components for a human subgroup are ordered: one component per
  animal species (in config order), then the human-pooling component, then
  the robust non-exchangeable component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

# Hard support bounds shared by the priors and the sampler: curve locations
# live in a box, standard deviations are floored away from zero, and the
# bridging factor's standardized variate is cut at +/- this many sds.
INTERCEPT_BOUNDS = (-10.0, 10.0)
LOG_SLOPE_BOUNDS = (-5.0, 5.0)
SD_FLOOR = 1e-3
CORRELATION_BOUNDS = (-1.0, 1.0)

HUMAN_COMPONENT = "human"
ROBUST_COMPONENT = "robust"


def _freeze(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


def _require(cond: bool, exc_type, msg: str) -> None:
    if not cond:
        raise exc_type(msg)


@dataclass(frozen=True)
class DoseGrid:
    """Ordered dose ladder with the reference dose used to centre the model.

    Doses and reference dose share one unit (mg/kg throughout this package).
    """

    doses: tuple[float, ...]
    reference_dose: float

    def __post_init__(self):
        _require(len(self.doses) > 0, ConfigError, "dose grid is empty")
        _require(all(d > 0 for d in self.doses), ConfigError, "doses must be positive")
        _require(
            all(a < b for a, b in zip(self.doses, self.doses[1:])),
            ConfigError,
            "doses must be strictly increasing",
        )
        _require(self.reference_dose > 0, ConfigError, "reference dose must be positive")
        object.__setattr__(self, "doses", tuple(float(d) for d in self.doses))
        object.__setattr__(self, "reference_dose", float(self.reference_dose))

    def __len__(self) -> int:
        return len(self.doses)

    def log_ratios(self) -> np.ndarray:
        """log(d / d_ref) for every dose, before any scale factor."""
        return np.log(np.asarray(self.doses) / self.reference_dose)


@dataclass(frozen=True)
class AnimalStudy:
    """One completed animal toxicology study: binomial outcomes per dose."""

    study_id: str
    species: str
    grid: DoseGrid
    n_treated: tuple[int, ...]
    n_events: tuple[int, ...]

    def __post_init__(self):
        _require(bool(self.study_id), DataError, "study_id is empty")
        _require(bool(self.species), DataError, "species is empty")
        J = len(self.grid)
        _require(
            len(self.n_treated) == J and len(self.n_events) == J,
            DataError,
            f"study {self.study_id}: counts must match the {J}-dose grid",
        )
        for n, r in zip(self.n_treated, self.n_events):
            _require(
                int(n) == n and int(r) == r and n >= 0 and r >= 0,
                DataError,
                f"study {self.study_id}: counts must be non-negative integers",
            )
            _require(r <= n, DataError, f"study {self.study_id}: events exceed group size")
        object.__setattr__(self, "n_treated", tuple(int(n) for n in self.n_treated))
        object.__setattr__(self, "n_events", tuple(int(r) for r in self.n_events))


@dataclass(frozen=True)
class Cohort:
    """One treated human cohort: dose index into the trial grid plus counts."""

    dose_index: int
    n_treated: int
    n_events: int

    def __post_init__(self):
        _require(self.dose_index >= 0, DataError, "dose_index must be >= 0")
        _require(
            self.n_treated > 0 and int(self.n_treated) == self.n_treated,
            DataError,
            "n_treated must be a positive integer",
        )
        _require(
            self.n_events >= 0 and int(self.n_events) == self.n_events,
            DataError,
            "n_events must be a non-negative integer",
        )
        _require(self.n_events <= self.n_treated, DataError, "events exceed cohort size")


@dataclass(frozen=True)
class HumanTrialState:
    """Accrued state of one human subgroup's escalation trial.

    Immutable: adding a cohort returns a new state.  The cohort sequence is
    the audit trail; per-dose tallies are derived, never stored.
    """

    subgroup_id: str
    grid: DoseGrid
    cohorts: tuple[Cohort, ...] = ()
    max_sample_size: int = 24
    cohort_size: int = 3

    def __post_init__(self):
        _require(bool(self.subgroup_id), DataError, "subgroup_id is empty")
        _require(self.max_sample_size > 0, ConfigError, "max_sample_size must be positive")
        _require(self.cohort_size > 0, ConfigError, "cohort_size must be positive")
        for c in self.cohorts:
            _require(
                c.dose_index < len(self.grid),
                DataError,
                f"cohort dose index {c.dose_index} outside {len(self.grid)}-dose grid",
            )
        _require(
            self.n_enrolled <= self.max_sample_size,
            DataError,
            f"{self.n_enrolled} patients exceed the cap of {self.max_sample_size}",
        )
        object.__setattr__(self, "cohorts", tuple(self.cohorts))

    @property
    def n_enrolled(self) -> int:
        return sum(c.n_treated for c in self.cohorts)

    @property
    def is_full(self) -> bool:
        return self.n_enrolled + self.cohort_size > self.max_sample_size

    def with_cohort(self, cohort: Cohort) -> "HumanTrialState":
        return replace(self, cohorts=self.cohorts + (cohort,))

    def dose_tallies(self) -> tuple[np.ndarray, np.ndarray]:
        """(patients, events) accumulated per grid dose."""
        n = np.zeros(len(self.grid), dtype=np.int64)
        r = np.zeros(len(self.grid), dtype=np.int64)
        for c in self.cohorts:
            n[c.dose_index] += c.n_treated
            r[c.dose_index] += c.n_events
        return n, r

    def administered_indices(self) -> tuple[int, ...]:
        return tuple(sorted({c.dose_index for c in self.cohorts}))

    def highest_administered(self) -> int | None:
        idx = self.administered_indices()
        return max(idx) if idx else None


@dataclass(frozen=True)
class LogNormalPrior:
    """Log-normal prior stored by the location/scale of log(x)."""

    log_location: float
    log_scale: float

    def __post_init__(self):
        _require(self.log_scale > 0, ConfigError, "log-normal scale must be positive")

    @property
    def median(self) -> float:
        return math.exp(self.log_location)


@dataclass(frozen=True)
class BridgingPrior:
    """Truncated-normal prior for a subgroup's dose-scaling factor.

    Centred at 1 (no rescaling); ``scale`` controls the prior spread and the
    support is the interval (0, upper).  The default upper bound of 2 keeps
    the support symmetric about the centre.
    """

    scale: float = 0.255
    upper: float = 2.0

    def __post_init__(self):
        _require(self.scale > 0, ConfigError, "bridging prior scale must be positive")
        _require(self.upper > 1.0, ConfigError, "bridging prior upper bound must exceed the centre 1")

    @property
    def standardized_bounds(self) -> tuple[float, float]:
        """Support of u where the factor is 1 + scale * u."""
        return (-1.0 / self.scale, (self.upper - 1.0) / self.scale)


@dataclass(frozen=True)
class TranslationPriors:
    """Priors for the factors that put doses on a shared human-equivalent scale.

    ``allometric`` maps species name to the log-normal prior of its dose
    conversion factor.  ``bridging`` maps subgroup id to the truncated-normal
    prior of its dose-scaling factor (missing subgroups get the default).
    """

    allometric: Mapping[str, LogNormalPrior]
    bridging: Mapping[str, BridgingPrior] = field(default_factory=dict)
    default_bridging: BridgingPrior = BridgingPrior()

    def __post_init__(self):
        object.__setattr__(self, "allometric", dict(self.allometric))
        object.__setattr__(self, "bridging", dict(self.bridging))

    def bridging_for(self, subgroup_id: str) -> BridgingPrior:
        return self.bridging.get(subgroup_id, self.default_bridging)


@dataclass(frozen=True)
class NonExchangeablePrior:
    """Fixed bivariate normal used when a subgroup's curve stands alone.

    The off-diagonal term is exposed but zero by default: weakly-informative
    and independent across intercept and log-slope.
    """

    mean: tuple[float, float] = (-1.099, 0.0)
    sd: tuple[float, float] = (2.0, 1.0)
    correlation: float = 0.0

    def __post_init__(self):
        _require(all(s > 0 for s in self.sd), ConfigError, "non-exchangeable sds must be positive")
        _require(
            CORRELATION_BOUNDS[0] < self.correlation < CORRELATION_BOUNDS[1],
            ConfigError,
            "non-exchangeable correlation must lie in (-1, 1)",
        )


@dataclass(frozen=True)
class HyperpriorConfig:
    """Hyperpriors for the shared hierarchy.

    * mean of the top-level curve location: normal per coordinate,
    * study-level and subgroup-level sds: half-normal with the given scales,
    * correlations: uniform on (-1, 1),
    * sds floored at ``SD_FLOOR`` and locations confined to the support box
      (module constants) to match the reference implementation's truncations.
    """

    intercept_mean: float = -1.099
    intercept_sd: float = 1.98
    log_slope_mean: float = 0.0
    log_slope_sd: float = 0.99
    # half-normal scales: study-level (animal+borrowed) intercept/log-slope,
    # then human-pooling intercept/log-slope
    study_sd_scales: tuple[float, float] = (0.5, 0.25)
    human_sd_scales: tuple[float, float] = (0.25, 0.125)
    # half-normal scales for the between-species spread of curve locations
    species_sd_scales: tuple[float, float] = (1.0, 0.5)
    non_exchangeable: NonExchangeablePrior = NonExchangeablePrior()

    def __post_init__(self):
        _require(self.intercept_sd > 0, ConfigError, "intercept prior sd must be positive")
        _require(self.log_slope_sd > 0, ConfigError, "log-slope prior sd must be positive")
        for name in ("study_sd_scales", "human_sd_scales", "species_sd_scales"):
            pair = getattr(self, name)
            _require(
                len(pair) == 2 and all(s > 0 for s in pair),
                ConfigError,
                f"{name} must be two positive scales",
            )


@dataclass(frozen=True)
class MixtureWeights:
    """Prior component weights for one subgroup's curve.

    ``species`` holds one weight per configured animal species (same order),
    then ``human`` weights the cross-subgroup pooling component and
    ``robust`` the stand-alone component.  Weights are non-negative and sum
    to one.
    """

    species: tuple[float, ...]
    human: float
    robust: float

    def __post_init__(self):
        ws = (*self.species, self.human, self.robust)
        _require(all(w >= 0 for w in ws), ConfigError, "mixture weights must be non-negative")
        total = math.fsum(ws)
        _require(abs(total - 1.0) <= 1e-9, ConfigError, f"mixture weights sum to {total}, not 1")
        object.__setattr__(self, "species", tuple(float(w) for w in self.species))

    def as_array(self) -> np.ndarray:
        return _freeze((*self.species, self.human, self.robust))


@dataclass(frozen=True)
class ModelConfig:
    """Everything the sampler needs besides the data.

    ``species`` fixes the component order for every MixtureWeights instance;
    ``subgroups`` fixes the subgroup order used in results.  Subgroups in the
    data but missing from ``weights`` are an error, caught at packing time.
    """

    species: tuple[str, ...]
    subgroups: tuple[str, ...]
    hyper: HyperpriorConfig
    translation: TranslationPriors
    weights: Mapping[str, MixtureWeights]

    def __post_init__(self):
        _require(len(set(self.species)) == len(self.species), ConfigError, "duplicate species")
        _require(len(set(self.subgroups)) == len(self.subgroups), ConfigError, "duplicate subgroups")
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "subgroups", tuple(self.subgroups))
        object.__setattr__(self, "weights", dict(self.weights))
        for sp in self.species:
            _require(
                sp in self.translation.allometric,
                ConfigError,
                f"species {sp!r} has no dose-conversion prior",
            )
        for sub, w in self.weights.items():
            _require(
                len(w.species) == len(self.species),
                ConfigError,
                f"weights for {sub!r} carry {len(w.species)} species entries, expected {len(self.species)}",
            )

    @property
    def n_components(self) -> int:
        return len(self.species) + 2

    def component_names(self) -> tuple[str, ...]:
        return (*self.species, HUMAN_COMPONENT, ROBUST_COMPONENT)

    def weights_for(self, subgroup_id: str) -> MixtureWeights:
        try:
            return self.weights[subgroup_id]
        except KeyError:
            raise ConfigError(f"no mixture weights configured for subgroup {subgroup_id!r}") from None


@dataclass(frozen=True)
class ParameterState:
    """One full set of model parameters, used for density evaluation.

    Shapes (M studies, K species, L subgroups):
      study_curves (M, 2), species_means (K, 2), grand_mean (2,),
      human_mean (2,), subgroup_curves (L, 2), component (L,) ints,
      conversion (K,) natural scale, bridging (L,) natural scale,
      study_sds (2,), human_sds (2,), species_sds (2,) plus the three
      correlations.
    """

    study_curves: np.ndarray
    species_means: np.ndarray
    grand_mean: np.ndarray
    human_mean: np.ndarray
    subgroup_curves: np.ndarray
    component: np.ndarray
    conversion: np.ndarray
    bridging: np.ndarray
    study_sds: np.ndarray
    species_sds: np.ndarray
    human_sds: np.ndarray
    study_corr: float
    species_corr: float
    human_corr: float

    def __post_init__(self):
        for name, width in (
            ("study_curves", 2),
            ("species_means", 2),
            ("subgroup_curves", 2),
        ):
            arr = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if arr.size == 0:
                arr = arr.reshape(0, width)
            _require(arr.ndim == 2 and arr.shape[1] == width, DataError, f"{name} must be (n, {width})")
            object.__setattr__(self, name, _freeze(arr))
        for name in ("grand_mean", "human_mean", "study_sds", "species_sds", "human_sds"):
            arr = np.asarray(getattr(self, name), dtype=float)
            _require(arr.shape == (2,), DataError, f"{name} must have two entries")
            object.__setattr__(self, name, _freeze(arr))
        object.__setattr__(self, "component", _freeze(np.atleast_1d(self.component), dtype=np.int64))
        object.__setattr__(self, "conversion", _freeze(np.atleast_1d(self.conversion)))
        object.__setattr__(self, "bridging", _freeze(np.atleast_1d(self.bridging)))
        L = self.subgroup_curves.shape[0]
        _require(self.component.shape == (L,), DataError, "one component index per subgroup")
        _require(self.bridging.shape == (L,), DataError, "one bridging factor per subgroup")
