"""
rnest - Experiments
-------------------
Error-versus-cost curves, schedule sweeps and wall-clock efficiency comparisons built
on top of the repetition runner.
"""

import math
from typing import Dict, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
import structlog
from scipy import stats

from rnest.core import (
    GeometricSchedule,
    NestedProblem,
    Regime,
    default_schedule,
    expected_leaf_cost,
    unchecked_schedule,
    validate_schedule,
)
from rnest.errors import DomainError, ScheduleError
from rnest.nmc import NmcAllocation, NmcEstimator, allocate_nmc1, allocate_nmc2
from rnest.quadrature import reference_value
from rnest.read import ReadConfig, ReadEstimator
from rnest.runner import run_fixed
from rnest.schemas import RunSummary

log = structlog.get_logger(__name__)

ALLOCATORS = {"nmc1": allocate_nmc1, "nmc2": allocate_nmc2}


def _read_reps(budget: float, schedule: GeometricSchedule) -> int:
    return max(1, int(round(budget / expected_leaf_cost(schedule, 0))))


def mse_vs_cost_curve(
    problem: NestedProblem,
    estimators: Sequence[str],
    budgets: Sequence[int],
    repetitions: int = 20,
    seed: int = 0,
    workers: int = 1,
    schedule: Optional[GeometricSchedule] = None,
    truth: Optional[float] = None,
) -> pd.DataFrame:
    """Empirical MSE against the truth at each budget, for each estimator.

    READ spends a budget as round(budget / expected leaf cost) repetitions averaged
    into one estimate; NMC spends it through its allocation. Every point repeats the
    whole estimate ``repetitions`` times.
    """
    truth = reference_value(problem) if truth is None else truth
    if truth is None:
        raise DomainError(f"problem '{problem.name}' has no ground truth or reference value")
    schedule = schedule or default_schedule(problem.depth)

    rows = []
    for e_idx, name in enumerate(estimators):
        for b_idx, budget in enumerate(budgets):
            if name == "read":
                estimator = ReadEstimator(ReadConfig(problem=problem, schedule=schedule))
                reps = _read_reps(budget, schedule)
                errors, costs = [], []
                for j in range(repetitions):
                    summary, _ = run_fixed(estimator, reps, seed, workers, key=(e_idx, b_idx, j))
                    errors.append((summary.mean - truth) ** 2)
                    costs.append(summary.total_leaf_cost)
                setting = f"reps={reps}"
            elif name in ALLOCATORS:
                alloc = ALLOCATORS[name](budget, problem.depth)
                estimator = NmcEstimator(problem, alloc, label=name)
                _, records = run_fixed(estimator, repetitions, seed, workers, key=(e_idx, b_idx))
                errors = [(r.value - truth) ** 2 for r in records]
                costs = [r.leaf_cost for r in records]
                setting = "counts=" + "x".join(str(c) for c in alloc.counts)
            else:
                raise DomainError(f"unknown estimator '{name}'")
            rows.append(
                {
                    "estimator": name,
                    "budget": int(budget),
                    "mse": float(np.mean(errors)),
                    "mean_cost": float(np.mean(costs)),
                    "setting": setting,
                }
            )
            log.info("curve_point", **rows[-1])
    return pd.DataFrame(rows, columns=["estimator", "budget", "mse", "mean_cost", "setting"])


def fit_slopes(curve: pd.DataFrame) -> Dict[str, float]:
    """Least-squares slope of log10(MSE) against log10(cost), per estimator."""
    slopes = {}
    for name, group in curve.groupby("estimator", sort=False):
        if len(group) < 2:
            continue
        fit = stats.linregress(np.log10(group["mean_cost"]), np.log10(group["mse"]))
        slopes[str(name)] = float(fit.slope)
    return slopes


def parameter_sweep(
    problem: NestedProblem,
    r0_grid: Sequence[float],
    r1_grid: Sequence[float],
    reps: int,
    seed: int = 0,
    workers: int = 1,
) -> pd.DataFrame:
    """Standard deviation and work-normalized SD of READ over a (r0, r1) grid.

    Cells outside the LBS ranges still run; they are tagged ``unvalidated``.
    """
    if problem.depth != 2:
        raise DomainError(f"the sweep needs a depth-2 problem, got depth {problem.depth}")
    if len(r0_grid) == 0 or len(r1_grid) == 0:
        raise DomainError("sweep grids must not be empty")

    rows = []
    for i, r0 in enumerate(r0_grid):
        for j, r1 in enumerate(r1_grid):
            try:
                schedule = validate_schedule(2, (r0, r1), Regime.LBS)
                unvalidated = False
            except ScheduleError:
                schedule = unchecked_schedule((r0, r1))
                unvalidated = True
            estimator = ReadEstimator(ReadConfig(problem=problem, schedule=schedule))
            summary, _ = run_fixed(estimator, reps, seed, workers, key=(i, j))
            cost = expected_leaf_cost(schedule, 0)
            rows.append(
                {
                    "r0": float(r0),
                    "r1": float(r1),
                    "sd": summary.sd,
                    "wn_sd": math.sqrt(cost) * summary.sd,
                    "unvalidated": unvalidated,
                }
            )
            log.info("sweep_cell", **rows[-1])
    return pd.DataFrame(rows, columns=["r0", "r1", "sd", "wn_sd", "unvalidated"])


def time_normalized_error(summary: RunSummary, truth: float) -> float:
    """Wall time multiplied by the squared error of the mean."""
    return summary.wall_time * (summary.mean - truth) ** 2


def efficiency_table(
    problem: NestedProblem,
    read_reps: int,
    allocations: Mapping[str, NmcAllocation],
    seed: int = 0,
    workers: int = 1,
    schedule: Optional[GeometricSchedule] = None,
    truth: Optional[float] = None,
) -> pd.DataFrame:
    """Cost, time, squared error and time-normalized error of READ against NMC runs."""
    truth = reference_value(problem) if truth is None else truth
    if truth is None:
        raise DomainError(f"problem '{problem.name}' has no ground truth or reference value")
    schedule = schedule or default_schedule(problem.depth)

    runs = [
        ("read", f"{read_reps} repetitions", ReadEstimator(ReadConfig(problem=problem, schedule=schedule)), read_reps)
    ]
    for name, alloc in allocations.items():
        setting = "N=(" + ", ".join(str(c) for c in alloc.counts) + ")"
        runs.append((name, setting, NmcEstimator(problem, alloc, label=name), 1))

    rows = []
    for idx, (name, setting, estimator, n) in enumerate(runs):
        summary, _ = run_fixed(estimator, n, seed, workers, key=(idx,))
        rows.append(
            {
                "method": name,
                "setting": setting,
                "total_cost": summary.total_leaf_cost,
                "time": summary.wall_time,
                "squared_error": (summary.mean - truth) ** 2,
                "time_normalized_error": time_normalized_error(summary, truth),
            }
        )
    return pd.DataFrame(rows)


def estimate_scatter(
    problem: NestedProblem,
    estimators: Sequence[str],
    budgets: Sequence[int],
    repetitions: int = 20,
    seed: int = 0,
    workers: int = 1,
    schedule: Optional[GeometricSchedule] = None,
) -> pd.DataFrame:
    """Raw estimates per budget, for problems without a reference value."""
    schedule = schedule or default_schedule(problem.depth)
    rows = []
    for e_idx, name in enumerate(estimators):
        for b_idx, budget in enumerate(budgets):
            if name == "read":
                estimator = ReadEstimator(ReadConfig(problem=problem, schedule=schedule))
                reps = _read_reps(budget, schedule)
                for j in range(repetitions):
                    summary, _ = run_fixed(estimator, reps, seed, workers, key=(e_idx, b_idx, j))
                    rows.append((name, int(budget), summary.total_leaf_cost, summary.mean))
            elif name in ALLOCATORS:
                alloc = ALLOCATORS[name](budget, problem.depth)
                _, records = run_fixed(NmcEstimator(problem, alloc, label=name), repetitions, seed, workers, key=(e_idx, b_idx))
                rows.extend((name, int(budget), r.leaf_cost, r.value) for r in records)
            else:
                raise DomainError(f"unknown estimator '{name}'")
    return pd.DataFrame(rows, columns=["estimator", "budget", "cost", "estimate"])
