"""
rnest - Built-in Problems
-------------------------
Nested problems used by the experiments and the test suite:

- gaussian-sine: Gaussian random walk started at pi/2 with sine couplings; exact value exp(-1/2)
- heavy-tail:    the same couplings driven by non-central t increments
- sigmoid:       Gaussian random walk from 0 with logistic couplings
- bermudan:      Bermudan basket put under multi-asset geometric Brownian motion
- counting:      affine couplings with call counters, for cost accounting
"""

import math
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy.special import expit

from rnest.core import NestedProblem, Trajectory
from rnest.errors import DomainError
from rnest.schemas import GbmParams


class GaussianWalk:
    """y(0) ~ N(mu0, 1), y(d) ~ N(y(d-1), 1)."""

    def __init__(self, mu0: float = 0.0):
        self.mu0 = mu0

    def __call__(self, history: Trajectory, rng: np.random.Generator) -> float:
        loc = self.mu0 if len(history) == 0 else history[-1][0]
        return loc + rng.standard_normal()


class NoncentralTWalk:
    """y(0) = eps, y(d) = y(d-1) + eps with eps ~ non-central t(df, ncp) i.i.d."""

    def __init__(self, df: float, ncp: float):
        self.df = df
        self.ncp = ncp

    def increment(self, rng: np.random.Generator) -> float:
        z = rng.standard_normal()
        v = rng.chisquare(self.df)
        return (z + self.ncp) / math.sqrt(v / self.df)

    def __call__(self, history: Trajectory, rng: np.random.Generator) -> float:
        base = 0.0 if len(history) == 0 else history[-1][0]
        return base + self.increment(rng)


def _sin_plus(path: Trajectory, z: float) -> float:
    return math.sin(path[-1][0] + z)


def _sin_minus(path: Trajectory, z: float) -> float:
    return math.sin(path[-1][0] - z)


def _last_coordinate(path: Trajectory) -> float:
    return float(path[-1][0])


def _sigmoid_plus(path: Trajectory, z: float) -> float:
    return float(expit(path[-1][0] + z))


def _sigmoid_last(path: Trajectory) -> float:
    return float(expit(path[-1][0]))


def gaussian_sine_problem() -> NestedProblem:
    """D = 2 sine couplings on a Gaussian walk from pi/2; gamma_0 = exp(-1/2)."""
    return NestedProblem(
        name="gaussian-sine",
        depth=2,
        dim=1,
        simulator=GaussianWalk(mu0=math.pi / 2.0),
        inner=(_sin_plus, _sin_minus),
        terminal=_last_coordinate,
        ground_truth=math.exp(-0.5),
    )


def heavy_tail_problem(df: float = 10.0, ncp: float = 0.5) -> NestedProblem:
    """Sine couplings of the Gaussian-sine problem with non-central t increments."""
    if not df > 0.0:
        raise DomainError(f"degrees of freedom must be positive, got {df}")
    return NestedProblem(
        name="heavy-tail",
        depth=2,
        dim=1,
        simulator=NoncentralTWalk(df=df, ncp=ncp),
        inner=(_sin_plus, _sin_minus),
        terminal=_last_coordinate,
        params={"df": df, "ncp": ncp},
    )


def sigmoid_problem() -> NestedProblem:
    """D = 2 logistic couplings on a Gaussian walk from 0; no closed form."""
    return NestedProblem(
        name="sigmoid",
        depth=2,
        dim=1,
        simulator=GaussianWalk(mu0=0.0),
        inner=(_sigmoid_plus, _sigmoid_plus),
        terminal=_sigmoid_last,
    )


class GbmStepper:
    """Exact GBM transition over one exercise interval; y(0) is the spot vector."""

    def __init__(self, params: GbmParams):
        h = params.T / params.D
        self.spot = np.asarray(params.spot, dtype=np.float64)
        self.drift = (params.rate - params.div - 0.5 * params.sigma**2) * h
        self.vol = params.sigma * math.sqrt(h)
        self.M = params.M

    def __call__(self, history: Trajectory, rng: np.random.Generator) -> np.ndarray:
        if len(history) == 0:
            return self.spot
        z = rng.standard_normal(self.M)
        return history[-1] * np.exp(self.drift + self.vol * z)


class BasketPut:
    """U(x) = max(K - mean(x), 0) and the exercise-or-continue couplings."""

    def __init__(self, params: GbmParams):
        self.strike = params.strike
        self.discount = math.exp(-params.rate * params.T / params.D)

    def payoff(self, x: np.ndarray) -> float:
        return max(self.strike - float(x.mean()), 0.0)

    def terminal(self, path: Trajectory) -> float:
        return self.payoff(path[-1])

    def exercise_or_continue(self, path: Trajectory, z: float) -> float:
        return max(self.payoff(path[-1]), self.discount * z)


def bermudan_problem(params: Optional[GbmParams] = None) -> NestedProblem:
    """Bermudan basket put as an optimal-stopping nested expectation of depth params.D."""
    params = params or GbmParams()
    put = BasketPut(params)
    return NestedProblem(
        name="bermudan",
        depth=params.D,
        dim=params.M,
        simulator=GbmStepper(params),
        inner=(put.exercise_or_continue,) * params.D,
        terminal=put.terminal,
        params=params.model_dump(),
    )


class CallCounter:
    """Wraps a callable and counts its invocations."""

    def __init__(self, fn: Callable[..., Any]):
        self.fn = fn
        self.calls = 0

    def __call__(self, *args: Any) -> Any:
        self.calls += 1
        return self.fn(*args)

    def reset(self) -> None:
        self.calls = 0


def _half_plus_state(path: Trajectory, z: float) -> float:
    return 0.5 * z + path[-1][0]


def counting_problem(D: int = 2) -> NestedProblem:
    """Affine couplings g_d(y, z) = z/2 + y(d) on a Gaussian walk from 1, instrumented.

    ``problem.simulator.calls`` and ``problem.terminal.calls`` count invocations; the
    counters are plain attributes and only meaningful in single-process runs.
    """
    if D < 0:
        raise DomainError(f"depth must be non-negative, got {D}")
    # gamma_d(y(0:d-1)) = a_d * y(d-1) with a_D = 1 and a_d = a_{d+1}/2 + 1
    a = 1.0
    for _ in range(D):
        a = 0.5 * a + 1.0
    return NestedProblem(
        name="counting",
        depth=D,
        dim=1,
        simulator=CallCounter(GaussianWalk(mu0=1.0)),
        inner=(_half_plus_state,) * D,
        terminal=CallCounter(_last_coordinate),
        ground_truth=a,
        params={"depth": D},
    )


PROBLEMS: Dict[str, Callable[..., NestedProblem]] = {
    "gaussian-sine": gaussian_sine_problem,
    "heavy-tail": heavy_tail_problem,
    "sigmoid": sigmoid_problem,
    "bermudan": bermudan_problem,
    "counting": counting_problem,
}


def get_problem(name: str, **params: Any) -> NestedProblem:
    """Build a registered problem by name."""
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise DomainError(f"unknown problem '{name}'; choose from {sorted(PROBLEMS)}") from None
    return factory(**params)
