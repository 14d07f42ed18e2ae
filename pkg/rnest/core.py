"""
rnest - Core Primitives
-----------------------
Problem abstraction, trajectories, geometric randomization and the parameter ranges
under which the recursive estimator is unbiased with finite cost.

A nested problem of depth D is a simulator for the stages y(0), ..., y(D) together with
functions g_0, ..., g_D. The target is

    gamma_D(y(0:D-1)) = E[g_D(y(0:D)) | y(0:D-1)]
    gamma_d(y(0:d-1)) = E[g_d(y(0:d), gamma_{d+1}(y(0:d))) | y(0:d-1)],  d < D

and the quantity of interest is gamma_0.
"""

import math
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from rnest.errors import ContractError, DomainError, ScheduleError


class Trajectory:
    """Immutable prefix (y(0), ..., y(d-1)) of the stage process."""

    __slots__ = ("_stages",)

    def __init__(self, stages: Iterable[np.ndarray] = ()):
        stages = tuple(np.array(s, dtype=np.float64) for s in stages)
        if stages:
            dim = stages[0].shape
            if len(dim) != 1 or any(s.shape != dim for s in stages):
                raise ContractError("all stages must be vectors of one common dimension")
            for s in stages:
                s.flags.writeable = False
        self._stages = stages

    @classmethod
    def empty(cls) -> "Trajectory":
        return cls()

    def append(self, stage: Any) -> "Trajectory":
        """Return a new trajectory one stage longer."""
        stage = np.array(stage, dtype=np.float64, ndmin=1)
        if self._stages and stage.shape != self._stages[0].shape:
            raise ContractError(
                f"stage of shape {stage.shape} does not match {self._stages[0].shape}"
            )
        stage.flags.writeable = False
        new = Trajectory.__new__(Trajectory)
        new._stages = self._stages + (stage,)
        return new

    @property
    def stages(self) -> Tuple[np.ndarray, ...]:
        return self._stages

    @property
    def dim(self) -> Optional[int]:
        return self._stages[0].shape[0] if self._stages else None

    def __len__(self) -> int:
        return len(self._stages)

    def __getitem__(self, index: int) -> np.ndarray:
        return self._stages[index]

    def __repr__(self) -> str:
        return f"Trajectory(length={len(self)}, dim={self.dim})"


Simulator = Callable[[Trajectory, np.random.Generator], Any]
InnerFunction = Callable[[Trajectory, float], float]
TerminalFunction = Callable[[Trajectory], float]


class NestedProblem(BaseModel):
    """A repeatedly nested expectation: simulator plus the functions g_0..g_D."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = Field(..., description="Registry name of the problem")
    depth: int = Field(..., ge=0, description="Nesting depth D")
    dim: int = Field(..., ge=1, description="Per-stage state dimension M")
    simulator: Simulator = Field(..., description="Draws y(d) given a trajectory of length d")
    inner: Tuple[InnerFunction, ...] = Field(..., description="g_0 .. g_{D-1}")
    terminal: TerminalFunction = Field(..., description="g_D")
    ground_truth: Optional[float] = Field(None, description="Exact gamma_0 when known")
    params: Dict[str, Any] = Field(default_factory=dict, description="Construction parameters")

    @model_validator(mode="after")
    def _check_inner(self) -> "NestedProblem":
        if len(self.inner) != self.depth:
            raise ValueError(f"expected {self.depth} inner functions, got {len(self.inner)}")
        return self

    def simulate(self, history: Trajectory, rng: np.random.Generator) -> Trajectory:
        """Draw the next stage and return the extended trajectory."""
        return history.append(self.simulator(history, rng))


class Regime(str, Enum):
    LBS = "lbs"
    LBL = "lbl"
    UNCHECKED = "unchecked"


class GeometricSchedule(BaseModel):
    """Per-depth rates (r_0, ..., r_{D-1}) of the geometric level distributions."""

    model_config = ConfigDict(frozen=True)

    rates: Tuple[float, ...]
    regime: Regime = Regime.UNCHECKED
    delta: Optional[float] = None

    @property
    def depth(self) -> int:
        return len(self.rates)

    @property
    def validated(self) -> bool:
        return self.regime is not Regime.UNCHECKED


class CostedEstimate(NamedTuple):
    """One estimator value with its exact cost counters."""

    value: float
    leaf_cost: int
    sim_calls: int


def geometric_pmf(r: float, n: int) -> float:
    """P[Geo(r) = n] = r (1 - r)^n on the support {0, 1, 2, ...}."""
    if not 0.0 < r < 1.0:
        raise DomainError(f"geometric rate must lie in (0, 1), got {r}")
    if n < 0:
        raise DomainError(f"geometric support is non-negative, got {n}")
    return r * (1.0 - r) ** n


def sample_geometric(r: float, rng: np.random.Generator) -> int:
    """Draw N ~ Geo(r) by inversion from a single uniform."""
    if not 0.5 < r < 1.0:
        raise DomainError(f"sampling rate must lie in (1/2, 1), got {r}")
    # 1 - U lies in (0, 1], so the logarithm is finite
    u = 1.0 - rng.random()
    return int(math.floor(math.log(u) / math.log1p(-r)))


def implied_k(r: float) -> float:
    """k with r = 1 - 2^{-k}."""
    if r >= 1.0:
        return math.inf
    return -math.log2(1.0 - r)


def lbs_interval(d: int) -> Tuple[float, float]:
    """Open k-interval for depth d when g_d has a bounded second derivative in z."""
    p = 2.0 ** (d + 1)
    return 1.0, p / (p - 1.0)


def lbl_interval(d: int, delta: float) -> Tuple[float, float]:
    """Open k-interval for depth d when g_d is Lipschitz in z, for moment loss delta."""
    upper = ((2.0 ** (d + 2) - 3.0 * delta) / (2.0 ** (d + 3) - 3.0 * delta)) * (
        (2.0 ** (d + 1) - delta) / (2.0 ** d - delta)
    )
    return 1.0, upper


def validate_schedule(
    D: int,
    rates: Sequence[float],
    regime: Regime | str,
    delta: Optional[float] = None,
) -> GeometricSchedule:
    """Check every rate against its regime's open interval and build the schedule."""
    regime = Regime(regime)
    rates = tuple(float(r) for r in rates)
    if len(rates) != D:
        raise DomainError(f"schedule needs {D} rates, got {len(rates)}")
    if regime is Regime.UNCHECKED:
        return unchecked_schedule(rates)
    if regime is Regime.LBL:
        if delta is None or not 0.0 < delta < 0.5:
            raise DomainError(f"LBL regime needs delta in (0, 1/2), got {delta}")
    elif delta is not None:
        raise DomainError("delta is only meaningful under the LBL regime")

    for d, r in enumerate(rates):
        lo, hi = lbs_interval(d) if regime is Regime.LBS else lbl_interval(d, delta)
        k = implied_k(r)
        if not lo < k < hi:
            raise ScheduleError(d, k, (lo, hi), regime.name)
    return GeometricSchedule(rates=rates, regime=regime, delta=delta)


def unchecked_schedule(rates: Sequence[float]) -> GeometricSchedule:
    """Schedule outside the LBS and LBL ranges; rates only need finite expected cost."""
    rates = tuple(float(r) for r in rates)
    for d, r in enumerate(rates):
        if not 0.5 < r < 1.0:
            raise DomainError(f"rate r_{d} = {r} must lie in (1/2, 1) for finite expected cost")
    return GeometricSchedule(rates=rates, regime=Regime.UNCHECKED)


def default_schedule(D: int) -> GeometricSchedule:
    """(0.74, 0.6) for D = 2, otherwise the LBS interval midpoints in k-space."""
    if D == 2:
        return validate_schedule(2, (0.74, 0.6), Regime.LBS)
    rates = []
    for d in range(D):
        lo, hi = lbs_interval(d)
        rates.append(1.0 - 2.0 ** (-(lo + hi) / 2.0))
    return validate_schedule(D, rates, Regime.LBS)


def expected_leaf_cost(schedule: GeometricSchedule, from_depth: int = 0) -> float:
    """prod_{k >= from_depth} r_k / (2 r_k - 1), evaluated on the decimal rates."""
    if not 0 <= from_depth <= schedule.depth:
        raise DomainError(f"from_depth must lie in [0, {schedule.depth}], got {from_depth}")
    cost = Fraction(1)
    for r in schedule.rates[from_depth:]:
        # rates are user decimals; exact rationals keep 37/8 exact
        q = Fraction(repr(r))
        cost *= q / (2 * q - 1)
    return float(cost)


def _check_power_of_two(length: int) -> int:
    if length < 2 or length & (length - 1):
        raise DomainError(f"length must be a power of two >= 2, got {length}")
    return length.bit_length() - 1


class OddEvenAccumulator:
    """Streaming odd/even sums over 1-based indices."""

    __slots__ = ("count", "odd", "even")

    def __init__(self) -> None:
        self.count = 0
        self.odd = 0.0
        self.even = 0.0

    def add(self, value: float) -> None:
        self.count += 1
        if self.count & 1:
            self.odd += value
        else:
            self.even += value

    @property
    def total(self) -> float:
        return self.odd + self.even


def split_odd_even(values: Sequence[float]) -> Tuple[float, float, float]:
    """(S_total, S_odd, S_even) for 2^n values, with S_total = S_odd + S_even."""
    _check_power_of_two(len(values))
    acc = OddEvenAccumulator()
    for v in values:
        acc.add(float(v))
    return acc.total, acc.odd, acc.even


def rep_rng(seed: int, index: int, key: Tuple[int, ...] = ()) -> np.random.Generator:
    """Independent stream for repetition ``index`` under ``seed`` and an optional key."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(*key, index)))
