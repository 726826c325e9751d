"""Robust Bayesian borrowing of animal and cross-subgroup co-data for
phase I dose-escalation trials: model, sampler, decision rules, trial
simulation, and a live conduct service.
"""

__version__ = "0.1.0"

from .betaess import BetaApprox, beta_moment_match, ess_report
from .decisions import (
    DoseDecision,
    IntervalThresholds,
    declare_mtd,
    interval_probabilities,
    recommend_next_dose,
    starting_dose,
)
from .errors import (
    ConfigError,
    DataError,
    EngineError,
    ExbridgeError,
    InfeasibleBetaError,
    StateError,
)
from .mcmc import (
    PosteriorResult,
    PriorPredictive,
    SamplerSettings,
    prior_predictive,
    run_posterior,
    sample_mixture_indicator,
)
from .io import AppConfig, RunManifest, default_app_config, load_animal_data, load_config
from .model import log_density_terms, log_joint_density, tox_prob
from .scenarios import SCENARIOS, AnalysisModelVariant, ScenarioSpec
from .simulate import (
    OCReport,
    SimulationDesign,
    TrialPairRecord,
    operating_characteristics,
    run_campaign,
    simulate_outcomes,
    simulate_trial_pair,
)
from .types import (
    AnimalStudy,
    Cohort,
    DoseGrid,
    HumanTrialState,
    HyperpriorConfig,
    MixtureWeights,
    ModelConfig,
    ParameterState,
    TranslationPriors,
)

__all__ = [name for name in dir() if not name.startswith("_")]
