"""Stroke diagnosis-and-treatment planning under uncertainty.

The package bundles a compiled POMDP over three latent vascular
conditions, exact and particle belief filters, threshold expert rules,
an anytime determinized-scenario planner, a reproducible benchmark
harness with figure rendering, and an HTTP session service for
interactive decision support.
"""

from .model import (Action, Clinical, ConfigError, CtReading, DsaReport,
                    InitialMixture, LikelihoodDomainError, ModelParams,
                    Observation, PatientState, RewardTable, StrokeModel,
                    load_params)
from .beliefs import (DegenerateUpdateError, ExactBelief, Marginals,
                      ParticleBelief, exact_update, initial_exact,
                      initial_particles, marginals, particle_update,
                      predict_exact, tv_distance)
from .policies import (ExpertConfig, ExpertDecision, expert_decision,
                       expert_policy, make_policy, random_policy)
from .solver import (PlanResult, PlanningError, Scenario, SolverConfig,
                     plan, rollout_value, sample_scenarios)
from .episodes import EpisodeTrace, StepRecord, run_episode
from .harness import BenchmarkReport, compute_metrics, run_benchmark
from .report import render_report
from .service import create_app

__version__ = "0.1.0"

__all__ = [
    "Action", "Clinical", "ConfigError", "CtReading", "DsaReport",
    "InitialMixture", "LikelihoodDomainError", "ModelParams", "Observation",
    "PatientState", "RewardTable", "StrokeModel", "load_params",
    "DegenerateUpdateError", "ExactBelief", "Marginals", "ParticleBelief",
    "exact_update", "initial_exact", "initial_particles", "marginals",
    "particle_update", "predict_exact", "tv_distance",
    "ExpertConfig", "ExpertDecision", "expert_decision", "expert_policy",
    "make_policy", "random_policy",
    "PlanResult", "PlanningError", "Scenario", "SolverConfig", "plan",
    "rollout_value", "sample_scenarios",
    "EpisodeTrace", "StepRecord", "run_episode",
    "BenchmarkReport", "compute_metrics", "run_benchmark",
    "render_report", "create_app",
    "__version__",
]
