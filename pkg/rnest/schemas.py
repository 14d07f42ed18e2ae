"""
rnest - Pydantic Data Models
----------------------------
Parameter sets, run summaries and experiment configurations exchanged between the
runner, the CLI and the JSON artifacts.
"""

from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _split_csv(value):
    """Accept "0.74,0.6" from flags and config files as a list."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class GbmParams(BaseModel):
    """Market model for the Bermudan basket put."""

    model_config = ConfigDict(frozen=True)

    M: int = Field(5, ge=1, description="Number of assets")
    T: float = Field(3.0, gt=0.0, description="Horizon in years")
    D: int = Field(3, ge=1, description="Number of exercise intervals")
    sigma: float = Field(0.2, ge=0.0, description="Volatility per sqrt(year)")
    rate: float = Field(0.05, description="Risk-free rate per year")
    div: float = Field(0.0, description="Dividend yield per year")
    strike: float = Field(100.0, gt=0.0, description="Strike K")
    spot: Optional[Tuple[float, ...]] = Field(None, description="Initial prices; defaults to 100 per asset")

    @model_validator(mode="before")
    @classmethod
    def _default_spot(cls, data):
        if isinstance(data, dict) and data.get("spot") is None:
            data = {**data, "spot": (100.0,) * int(data.get("M", 5))}
        return data

    @model_validator(mode="after")
    def _check_spot(self) -> "GbmParams":
        if len(self.spot) != self.M:
            raise ValueError(f"spot has {len(self.spot)} entries but M = {self.M}")
        if any(s <= 0.0 for s in self.spot):
            raise ValueError("spot prices must be positive")
        return self


class StoppingRule(BaseModel):
    """Stop once the (1 - delta_pct%) interval is narrower than 2 * epsilon."""

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(..., gt=0.0, description="Target half-width")
    delta_pct: float = Field(5.0, gt=0.0, lt=100.0, description="Tail mass in percent")
    min_reps: int = Field(100, ge=2, description="Repetitions before the first check")
    max_reps: int = Field(10_000_000, ge=2, description="Hard ceiling on repetitions")

    @model_validator(mode="after")
    def _check_bounds(self) -> "StoppingRule":
        if self.max_reps < self.min_reps:
            raise ValueError("max_reps must be at least min_reps")
        return self

    @property
    def confidence(self) -> float:
        return 1.0 - self.delta_pct / 100.0


class RunSummary(BaseModel):
    """Aggregate statistics over independent repetitions."""

    n: int = Field(..., ge=0, description="Repetitions completed")
    mean: Optional[float] = Field(None, description="Sample mean")
    sd: Optional[float] = Field(None, description="Sample standard deviation (n >= 2)")
    se: Optional[float] = Field(None, description="Standard error sd / sqrt(n)")
    ci_low: Optional[float] = Field(None, description="Lower confidence bound")
    ci_high: Optional[float] = Field(None, description="Upper confidence bound")
    confidence: float = Field(0.95, description="Confidence level of the interval")
    total_leaf_cost: int = Field(0, description="Terminal evaluations over all repetitions")
    total_sim_calls: int = Field(0, description="Simulator calls over all repetitions")
    mean_leaf_cost: Optional[float] = Field(None, description="Leaf cost per repetition")
    wall_time: float = Field(0.0, description="Seconds spent producing the repetitions")
    work_normalized_sd: Optional[float] = Field(None, description="sqrt(mean leaf cost) * sd")
    converged: Optional[bool] = Field(None, description="Stopping rule satisfied (adaptive runs)")
    aborted: bool = Field(False, description="A repetition failed and the run stopped early")


class RepetitionPlan(BaseModel):
    """Repetitions needed for a target root-mean-square error."""

    epsilon: float
    n: int
    expected_leaf_cost: float
    abs_error_bound: float = Field(..., description="Markov bound epsilon/sqrt(delta) on |error|")
    delta: float


class PriceRow(BaseModel):
    """One estimator row of a pricing table."""

    method: str
    setting: str
    cost: int
    time: float
    estimate: Optional[float]
    se: Optional[float]


Estimator = Literal["read", "nmc1", "nmc2"]
Command = Literal["estimate", "compare", "sweep", "price"]


class ExperimentConfig(BaseModel):
    """Everything needed to reproduce one CLI run."""

    model_config = ConfigDict(extra="forbid")

    command: Command
    problem: str = Field("gaussian-sine", description="Problem registry name")
    estimator: Estimator = "read"
    estimators: Tuple[Estimator, ...] = ("read", "nmc1", "nmc2")

    # schedule
    r: Optional[Tuple[float, ...]] = Field(None, description="Geometric rates r_0..r_{D-1}")
    regime: Optional[Literal["lbs", "lbl", "unchecked"]] = None
    delta: Optional[float] = Field(None, gt=0.0, lt=0.5)

    # repetitions or stopping rule
    reps: Optional[int] = Field(None, ge=1)
    epsilon: Optional[float] = Field(None, gt=0.0)
    conf: float = Field(95.0, gt=0.0, lt=100.0, description="Confidence level in percent")
    min_reps: int = Field(100, ge=2)
    max_reps: int = Field(10_000_000, ge=2)

    # budgets
    budget: Optional[int] = Field(None, ge=1, description="NMC budget for a single estimator")
    budget_grid: Optional[Tuple[int, ...]] = None
    repetitions: int = Field(20, ge=2, description="Independent runs per budget point")
    wall_clock: bool = False

    # sweep grids
    r0_grid: Optional[Tuple[float, ...]] = None
    r1_grid: Optional[Tuple[float, ...]] = None

    # problem parameters
    depth: int = Field(2, ge=0, description="Depth of the counting problem")
    df: float = Field(10.0, gt=0.0)
    ncp: float = 0.5
    assets: int = Field(5, ge=1)
    horizon: float = Field(3.0, gt=0.0)
    steps: int = Field(3, ge=1)
    sigma: float = Field(0.2, ge=0.0)
    rate: float = 0.05
    div: float = 0.0
    strike: float = Field(100.0, gt=0.0)
    spot: Optional[Tuple[float, ...]] = None

    # pricing baselines
    nmc: bool = False
    nmc_reps: int = Field(10, ge=1)

    seed: int = 20240101
    workers: int = Field(1, ge=1)
    out: Path = Path("results")
    trace: bool = False

    @field_validator("r", "estimators", "budget_grid", "r0_grid", "r1_grid", "spot", mode="before")
    @classmethod
    def _lists(cls, value):
        return _split_csv(value)

    @field_validator("budget_grid", mode="before")
    @classmethod
    def _budgets(cls, value):
        # accept scientific notation such as 1e6
        if value is None:
            return value
        return [int(float(v)) for v in _split_csv(value)]

    @field_validator("reps", "budget", "min_reps", "max_reps", mode="before")
    @classmethod
    def _counts(cls, value):
        if isinstance(value, str):
            return int(float(value))
        return value

    @model_validator(mode="after")
    def _check_run_mode(self) -> "ExperimentConfig":
        if self.command in ("estimate", "price") and (self.reps is None) == (self.epsilon is None):
            raise ValueError("exactly one of reps or epsilon must be set")
        if self.max_reps < self.min_reps:
            raise ValueError("max_reps must be at least min_reps")
        for name in ("budget_grid", "r0_grid", "r1_grid", "estimators"):
            value = getattr(self, name)
            if value is not None and len(value) == 0:
                raise ValueError(f"{name} must not be empty")
        return self

    def stopping_rule(self) -> Optional[StoppingRule]:
        if self.epsilon is None:
            return None
        return StoppingRule(
            epsilon=self.epsilon,
            delta_pct=100.0 - self.conf,
            min_reps=self.min_reps,
            max_reps=self.max_reps,
        )

    def gbm_params(self) -> GbmParams:
        return GbmParams(
            M=self.assets,
            T=self.horizon,
            D=self.steps,
            sigma=self.sigma,
            rate=self.rate,
            div=self.div,
            strike=self.strike,
            spot=self.spot,
        )


class SummaryDocument(BaseModel):
    """Summary JSON: the statistics plus the configuration that produced them."""

    config: ExperimentConfig
    estimator: str
    schedule: Optional[List[float]] = None
    regime: Optional[str] = None
    summary: RunSummary


class CurveDocument(BaseModel):
    """Fitted log-log slopes of an error-versus-cost comparison."""

    config: ExperimentConfig
    truth: float
    slopes: Dict[str, float]


class PriceTable(BaseModel):
    """Pricing rows in the cost / time / estimate / se layout."""

    config: ExperimentConfig
    rows: List[PriceRow]
