"""
rnest - Nested Monte Carlo Baselines
------------------------------------
Plug-in nested Monte Carlo: every inner conditional expectation is replaced by an
inner sample average over a fixed number of draws per level.
"""

import math
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from rnest.core import CostedEstimate, NestedProblem, Trajectory
from rnest.errors import DomainError


class NmcAllocation(BaseModel):
    """Inner sample counts (N_0, ..., N_D)."""

    model_config = ConfigDict(frozen=True)

    counts: Tuple[int, ...] = Field(..., min_length=1, description="Samples per level")

    @field_validator("counts")
    @classmethod
    def _positive(cls, counts: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(c < 1 for c in counts):
            raise ValueError(f"all counts must be positive, got {counts}")
        return counts

    @property
    def total_cost(self) -> int:
        return math.prod(self.counts)


def _level(
    problem: NestedProblem,
    counts: Tuple[int, ...],
    d: int,
    history: Trajectory,
    rng: np.random.Generator,
) -> Tuple[float, int]:
    """Plug-in estimate of gamma_d(history) and the simulator calls it used."""
    total = 0.0
    sim_calls = 0
    for _ in range(counts[d]):
        path = problem.simulate(history, rng)
        sim_calls += 1
        if d == problem.depth:
            total += problem.terminal(path)
        else:
            inner, calls = _level(problem, counts, d + 1, path, rng)
            sim_calls += calls
            total += problem.inner[d](path, inner)
    return total / counts[d], sim_calls


def nmc_estimate(problem: NestedProblem, alloc: NmcAllocation, rng: np.random.Generator) -> CostedEstimate:
    """Nested Monte Carlo estimate of gamma_0 under the given allocation."""
    counts = tuple(alloc.counts)
    if len(counts) != problem.depth + 1:
        raise DomainError(f"allocation needs {problem.depth + 1} counts, got {len(counts)}")
    if any(c < 1 for c in counts):
        raise DomainError(f"all counts must be positive, got {counts}")
    value, sim_calls = _level(problem, counts, 0, Trajectory.empty(), rng)
    return CostedEstimate(float(value), math.prod(counts), sim_calls)


def _root_count(budget: float, power: int) -> int:
    return max(1, int(round(budget ** (1.0 / power))))


def allocate_nmc1(budget: float, D: int) -> NmcAllocation:
    """N_0 = N_1 = ... = N_D = round(budget^{1/(D+1)})."""
    if budget < 1:
        raise DomainError(f"budget must be at least 1, got {budget}")
    m = _root_count(budget, D + 1)
    return NmcAllocation(counts=(m,) * (D + 1))


def allocate_nmc2(budget: float, D: int) -> NmcAllocation:
    """N_0 = m^2 and N_1 = ... = N_D = m with m = round(budget^{1/(D+2)})."""
    if budget < 1:
        raise DomainError(f"budget must be at least 1, got {budget}")
    m = _root_count(budget, D + 2)
    return NmcAllocation(counts=(m * m,) + (m,) * D)


class NmcEstimator:
    """Picklable closure over a problem and allocation, used by the runner."""

    def __init__(self, problem: NestedProblem, alloc: NmcAllocation, label: str = "nmc"):
        self.problem = problem
        self.alloc = alloc
        self.label = label

    @property
    def expected_cost(self) -> float:
        return float(self.alloc.total_cost)

    def __call__(self, rng: np.random.Generator) -> CostedEstimate:
        return nmc_estimate(self.problem, self.alloc, rng)

    def __repr__(self) -> str:
        return f"NmcEstimator(problem={self.problem.name!r}, counts={self.alloc.counts})"
