"""Optimal biased association and spectrum allocation in multi-tier cellular networks."""

from .analytic import assoc_prob, bias_from_assoc, mean_log_coverage, mean_utility, special_fns
from .exceptions import (
    DegenerateAssociation,
    DomainError,
    EmptyEvaluationRegion,
    HetNetError,
    InfeasiblePowerControl,
    InvalidAllocation,
    NoConvergence,
    NonPhysicalParameter,
    PathLossTooSmall,
    UnknownParameterPath,
    ValidationError,
)
from .model import AssociationVector, Link, NetworkModel, Scheme, SpectrumAllocation, Tier, validate
from .optimize import OptimizationResult, Solver, optimize_orthogonal, optimize_shared
from .simulate import CampaignMetrics, Window, run_campaign

__version__ = "0.1.0"

__all__ = [
    "AssociationVector", "CampaignMetrics", "DegenerateAssociation", "DomainError",
    "EmptyEvaluationRegion", "HetNetError", "InfeasiblePowerControl", "InvalidAllocation",
    "Link", "NetworkModel", "NoConvergence", "NonPhysicalParameter", "OptimizationResult",
    "PathLossTooSmall", "Scheme", "Solver", "SpectrumAllocation", "Tier", "UnknownParameterPath",
    "ValidationError", "Window", "assoc_prob", "bias_from_assoc", "mean_log_coverage",
    "mean_utility", "optimize_orthogonal", "optimize_shared", "run_campaign",
    "special_fns", "validate",
]
