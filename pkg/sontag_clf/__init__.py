"""
Sontag-formula state feedback for input-affine nonlinear systems, with
numerical checks of its inverse optimality.
"""

from .bulk import simulate_many
from .care import LinearFeedback, LinearSystem, SolverOptions, riccati_clf, solve_care
from .catalog import export_entry, get_entry, list_entries
from .clf_checks import check_clf, check_weights, eval_ab
from .exprcore import Expression, parse
from .hjb import (
    OptimalFeedback,
    hjb_residual_classical,
    hjb_residual_distorted,
    rank_clfs,
    verify_lambda_identity,
)
from .models import ClfCandidate, SamplingConfig, SystemModel, Weights
from .pipeline import run_experiment, validate_config
from .sim import SimConfig, Trajectory, ValueConsistency, costs, simulate, value_consistency
from .sontag import SontagController

__version__ = "0.1.0"

__all__ = [
    "ClfCandidate",
    "Expression",
    "LinearFeedback",
    "LinearSystem",
    "OptimalFeedback",
    "SamplingConfig",
    "SimConfig",
    "SolverOptions",
    "SontagController",
    "SystemModel",
    "Trajectory",
    "ValueConsistency",
    "Weights",
    "check_clf",
    "check_weights",
    "costs",
    "eval_ab",
    "export_entry",
    "get_entry",
    "hjb_residual_classical",
    "hjb_residual_distorted",
    "list_entries",
    "parse",
    "rank_clfs",
    "riccati_clf",
    "run_experiment",
    "simulate",
    "simulate_many",
    "solve_care",
    "validate_config",
    "value_consistency",
    "verify_lambda_identity",
]
