"""
rnest - Recursive Estimator
---------------------------
Unbiased estimation of gamma_d(history) by recursive randomized multilevel Monte Carlo.

At depth d < D the estimator draws y(d), a level N ~ Geo(r_d), and 2^N independent
estimates of gamma_{d+1}. The antithetic difference of g_d at the full mean and at the
odd/even half means, divided by P[N = n], is unbiased for gamma_d.
"""

from typing import Callable, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from rnest.core import (
    CostedEstimate,
    GeometricSchedule,
    InnerFunction,
    NestedProblem,
    OddEvenAccumulator,
    Trajectory,
    expected_leaf_cost,
    geometric_pmf,
    sample_geometric,
)
from rnest.errors import ContractError


class ReadConfig(BaseModel):
    """Problem plus the geometric schedule driving the recursion."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    problem: NestedProblem
    schedule: GeometricSchedule

    @model_validator(mode="after")
    def _check_depth(self) -> "ReadConfig":
        if self.schedule.depth != self.problem.depth:
            raise ValueError(
                f"schedule has {self.schedule.depth} rates but problem depth is {self.problem.depth}"
            )
        return self


class AntitheticTriple(NamedTuple):
    """Level n with the full, odd-half and even-half child means."""

    n: int
    mean_all: float
    mean_odd: Optional[float] = None
    mean_even: Optional[float] = None

    @classmethod
    def from_accumulator(cls, n: int, acc: OddEvenAccumulator) -> "AntitheticTriple":
        if n == 0:
            return cls(0, acc.odd)
        half = float(1 << (n - 1))
        return cls(n, acc.total / (2.0 * half), acc.odd / half, acc.even / half)


# (depth, triple, delta) for every internal node, in evaluation order
DeltaObserver = Callable[[int, AntitheticTriple, float], None]


def delta_antithetic(g_d: InnerFunction, history: Trajectory, triple: AntitheticTriple) -> float:
    """Antithetic difference of g_d; at level 0 just g_d at the single child."""
    if triple.n == 0:
        return g_d(history, triple.mean_all)
    if triple.mean_odd is None or triple.mean_even is None:
        raise ContractError(f"level {triple.n} triple is missing its half means")
    return g_d(history, triple.mean_all) - 0.5 * (
        g_d(history, triple.mean_odd) + g_d(history, triple.mean_even)
    )


def estimate_gamma(
    config: ReadConfig,
    d: int,
    history: Trajectory,
    rng: np.random.Generator,
    observer: Optional[DeltaObserver] = None,
) -> CostedEstimate:
    """One unbiased estimate of gamma_d(history) with its exact cost."""
    problem = config.problem
    D = problem.depth
    if not 0 <= d <= D or len(history) != d:
        raise ContractError(f"depth {d} needs a history of length {d}, got {len(history)}")

    path = problem.simulate(history, rng)
    if d == D:
        return CostedEstimate(float(problem.terminal(path)), 1, 1)

    r = config.schedule.rates[d]
    n = sample_geometric(r, rng)
    acc = OddEvenAccumulator()
    leaf_cost = 0
    sim_calls = 1
    # children run one after another on the same stream
    for _ in range(1 << n):
        child = estimate_gamma(config, d + 1, path, rng, observer)
        acc.add(child.value)
        leaf_cost += child.leaf_cost
        sim_calls += child.sim_calls

    triple = AntitheticTriple.from_accumulator(n, acc)
    delta = delta_antithetic(problem.inner[d], path, triple)
    if observer is not None:
        observer(d, triple, delta)
    return CostedEstimate(delta / geometric_pmf(r, n), leaf_cost, sim_calls)


def estimate_root(
    config: ReadConfig,
    rng: np.random.Generator,
    observer: Optional[DeltaObserver] = None,
) -> CostedEstimate:
    """One unbiased estimate of gamma_0."""
    return estimate_gamma(config, 0, Trajectory.empty(), rng, observer)


class ReadEstimator:
    """Picklable closure over a config, used by the runner."""

    label = "read"

    def __init__(self, config: ReadConfig):
        self.config = config

    @property
    def expected_cost(self) -> float:
        return expected_leaf_cost(self.config.schedule, 0)

    def __call__(self, rng: np.random.Generator) -> CostedEstimate:
        return estimate_root(self.config, rng)

    def __repr__(self) -> str:
        return f"ReadEstimator(problem={self.config.problem.name!r}, rates={self.config.schedule.rates})"
