"""
rnest - Recursive Nested Estimation
-----------------------------------
Unbiased Monte Carlo estimation of repeatedly nested expectations, with nested Monte
Carlo baselines, built-in test problems and a reproducible parallel runner.
"""

__version__ = "0.1.0"

from rnest.core import (
    GeometricSchedule,
    NestedProblem,
    Regime,
    Trajectory,
    default_schedule,
    expected_leaf_cost,
    validate_schedule,
)
from rnest.errors import ConfigError, ContractError, DomainError, RunAbortedError, ScheduleError
from rnest.nmc import NmcAllocation, allocate_nmc1, allocate_nmc2, nmc_estimate
from rnest.problems import get_problem
from rnest.read import ReadConfig, ReadEstimator, estimate_gamma, estimate_root

__all__ = [
    "__version__",
    "ConfigError",
    "ContractError",
    "DomainError",
    "GeometricSchedule",
    "NestedProblem",
    "NmcAllocation",
    "ReadConfig",
    "ReadEstimator",
    "Regime",
    "RunAbortedError",
    "ScheduleError",
    "Trajectory",
    "allocate_nmc1",
    "allocate_nmc2",
    "default_schedule",
    "estimate_gamma",
    "estimate_root",
    "expected_leaf_cost",
    "get_problem",
    "nmc_estimate",
    "validate_schedule",
]
