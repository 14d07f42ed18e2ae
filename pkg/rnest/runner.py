"""
rnest - Repetition Runner
-------------------------
Runs an estimator closure for many independent repetitions across a joblib worker
pool and aggregates the results.

Repetition i always draws from the stream derived from (seed, *key, i), so its value
does not depend on which worker ran it or how the repetitions were chunked. Chunks are
merged in repetition order.
"""

import math
import time
from pathlib import Path
from typing import Callable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from joblib import Parallel, delayed
from scipy import stats

from rnest.config import get_settings
from rnest.core import CostedEstimate, rep_rng
from rnest.errors import DomainError, RunAbortedError
from rnest.schemas import RepetitionPlan, RunSummary, StoppingRule, SummaryDocument

log = structlog.get_logger(__name__)

EstimatorFn = Callable[[np.random.Generator], CostedEstimate]

RECORD_COLUMNS = ["rep_index", "value", "leaf_cost", "sim_calls"]


class RepRecord(NamedTuple):
    rep_index: int
    value: float
    leaf_cost: int
    sim_calls: int


def z_quantile(confidence: float) -> float:
    """Two-sided normal quantile z_{1 - (1 - confidence)/2}."""
    return float(stats.norm.ppf(0.5 + 0.5 * confidence))


class RunningStats:
    """Welford accumulator over repetition records."""

    def __init__(self, confidence: float = 0.95):
        self.confidence = confidence
        self.z = z_quantile(confidence)
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.total_leaf_cost = 0
        self.total_sim_calls = 0

    def push(self, record: RepRecord) -> None:
        self.n += 1
        delta = record.value - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (record.value - self.mean)
        self.total_leaf_cost += record.leaf_cost
        self.total_sim_calls += record.sim_calls

    def extend(self, records: Sequence[RepRecord]) -> None:
        for record in records:
            self.push(record)

    @property
    def sd(self) -> Optional[float]:
        return math.sqrt(self.m2 / (self.n - 1)) if self.n >= 2 else None

    def half_width(self) -> Optional[float]:
        sd = self.sd
        return None if sd is None else self.z * sd / math.sqrt(self.n)

    def snapshot(
        self,
        wall_time: float = 0.0,
        converged: Optional[bool] = None,
        aborted: bool = False,
    ) -> RunSummary:
        return _build_summary(
            n=self.n,
            mean=self.mean if self.n else None,
            sd=self.sd,
            confidence=self.confidence,
            z=self.z,
            total_leaf_cost=self.total_leaf_cost,
            total_sim_calls=self.total_sim_calls,
            wall_time=wall_time,
            converged=converged,
            aborted=aborted,
        )


def _build_summary(
    n: int,
    mean: Optional[float],
    sd: Optional[float],
    confidence: float,
    z: float,
    total_leaf_cost: int,
    total_sim_calls: int,
    wall_time: float,
    converged: Optional[bool] = None,
    aborted: bool = False,
) -> RunSummary:
    se = ci_low = ci_high = wn_sd = None
    mean_leaf = total_leaf_cost / n if n else None
    if sd is not None:
        se = sd / math.sqrt(n)
        ci_low = mean - z * se
        ci_high = mean + z * se
        wn_sd = math.sqrt(mean_leaf) * sd
    return RunSummary(
        n=n,
        mean=mean,
        sd=sd,
        se=se,
        ci_low=ci_low,
        ci_high=ci_high,
        confidence=confidence,
        total_leaf_cost=total_leaf_cost,
        total_sim_calls=total_sim_calls,
        mean_leaf_cost=mean_leaf,
        wall_time=wall_time,
        work_normalized_sd=wn_sd,
        converged=converged,
        aborted=aborted,
    )


def summarize(records: Sequence[RepRecord], wall_time: float = 0.0, confidence: float = 0.95) -> RunSummary:
    """Batch statistics over a finished record list."""
    n = len(records)
    if n == 0:
        return RunSummary(n=0, confidence=confidence, wall_time=wall_time)
    values = np.fromiter((r.value for r in records), dtype=np.float64, count=n)
    return _build_summary(
        n=n,
        mean=float(values.mean()),
        sd=float(values.std(ddof=1)) if n >= 2 else None,
        confidence=confidence,
        z=z_quantile(confidence),
        total_leaf_cost=sum(r.leaf_cost for r in records),
        total_sim_calls=sum(r.sim_calls for r in records),
        wall_time=wall_time,
    )


def _run_chunk(
    estimator: EstimatorFn,
    seed: int,
    key: Tuple[int, ...],
    start: int,
    stop: int,
) -> List[RepRecord]:
    records = []
    for i in range(start, stop):
        est = estimator(rep_rng(seed, i, key))
        records.append(RepRecord(i, est.value, est.leaf_cost, est.sim_calls))
    return records


def _chunks(start: int, count: int, workers: int) -> List[Tuple[int, int]]:
    size = max(1, min(10_000, math.ceil(count / (workers * 8))))
    stop = start + count
    return [(lo, min(lo + size, stop)) for lo in range(start, stop, size)]


def _collect(
    estimator: EstimatorFn,
    seed: int,
    key: Tuple[int, ...],
    start: int,
    count: int,
    workers: int,
) -> Iterator[List[RepRecord]]:
    """Yield record chunks in repetition order."""
    bounds = _chunks(start, count, workers)
    if workers == 1:
        for lo, hi in bounds:
            yield _run_chunk(estimator, seed, key, lo, hi)
        return
    parallel = Parallel(n_jobs=workers, return_as="generator")
    yield from parallel(delayed(_run_chunk)(estimator, seed, key, lo, hi) for lo, hi in bounds)


def run_fixed(
    estimator: EstimatorFn,
    n: int,
    seed: int,
    workers: int = 1,
    key: Tuple[int, ...] = (),
    confidence: float = 0.95,
) -> Tuple[RunSummary, List[RepRecord]]:
    """Exactly n independent repetitions; returns the summary and the ordered records."""
    if n < 1:
        raise DomainError(f"need at least one repetition, got {n}")
    if workers < 1:
        raise DomainError(f"need at least one worker, got {workers}")

    running = RunningStats(confidence)
    records: List[RepRecord] = []
    started = time.perf_counter()
    try:
        for chunk in _collect(estimator, seed, key, 0, n, workers):
            records.extend(chunk)
            running.extend(chunk)
    except Exception as e:
        wall = time.perf_counter() - started
        summary = running.snapshot(wall, aborted=True)
        log.error("run_aborted", completed=len(records), requested=n, error=repr(e))
        raise RunAbortedError(records, e, summary) from e

    summary = running.snapshot(time.perf_counter() - started)
    log.info(
        "run_complete",
        estimator=repr(estimator),
        n=n,
        workers=workers,
        mean=summary.mean,
        se=summary.se,
        wall_time=round(summary.wall_time, 3),
    )
    return summary, records


def run_adaptive(
    estimator: EstimatorFn,
    rule: StoppingRule,
    seed: int,
    workers: int = 1,
    key: Tuple[int, ...] = (),
    records_out: Optional[List[RepRecord]] = None,
) -> RunSummary:
    """Extend the sample in batches until the interval is narrower than 2 * epsilon."""
    batch = max(rule.min_reps, get_settings().adaptive_batch)
    running = RunningStats(rule.confidence)
    started = time.perf_counter()
    converged = False
    target = rule.min_reps

    while True:
        count = target - running.n
        try:
            for chunk in _collect(estimator, seed, key, running.n, count, workers):
                running.extend(chunk)
                if records_out is not None:
                    records_out.extend(chunk)
        except Exception as e:
            wall = time.perf_counter() - started
            log.error("adaptive_run_aborted", completed=running.n, error=repr(e))
            raise RunAbortedError(records_out or [], e, running.snapshot(wall, False, True)) from e

        width = 2.0 * running.half_width()
        log.debug("adaptive_check", n=running.n, width=width, target=2.0 * rule.epsilon)
        if width < 2.0 * rule.epsilon:
            converged = True
            break
        if running.n >= rule.max_reps:
            break
        target = min(running.n + batch, rule.max_reps)

    summary = running.snapshot(time.perf_counter() - started, converged=converged)
    log.info(
        "adaptive_run_complete",
        n=summary.n,
        mean=summary.mean,
        half_width=(summary.ci_high - summary.ci_low) / 2.0,
        converged=converged,
    )
    return summary


def running_trace(records: Sequence[RepRecord], confidence: float = 0.95) -> pd.DataFrame:
    """Running mean with pointwise confidence bands after every repetition."""
    values = np.array([r.value for r in records], dtype=np.float64)
    k = np.arange(1, len(values) + 1)
    mean = np.cumsum(values) / k
    sq = np.cumsum(values * values)
    with np.errstate(invalid="ignore", divide="ignore"):
        var = np.where(k > 1, (sq - k * mean * mean) / (k - 1), np.nan)
        half = z_quantile(confidence) * np.sqrt(np.maximum(var, 0.0) / k)
    return pd.DataFrame({"k": k, "mean": mean, "ci_low": mean - half, "ci_high": mean + half})


def plan_repetitions(summary: RunSummary, epsilon: float, delta: float = 0.05) -> RepetitionPlan:
    """Repetitions for root-mean-square error epsilon, from a pilot summary.

    The mean of n repetitions has MSE var/n, so n = ceil(var/epsilon^2); by Markov's
    inequality the absolute error is below epsilon/sqrt(delta) with probability 1 - delta.
    """
    if summary.sd is None:
        raise DomainError("the pilot run needs at least two repetitions")
    if epsilon <= 0.0 or not 0.0 < delta < 1.0:
        raise DomainError("epsilon must be positive and delta in (0, 1)")
    n = max(1, math.ceil(summary.sd**2 / epsilon**2))
    return RepetitionPlan(
        epsilon=epsilon,
        n=n,
        expected_leaf_cost=n * summary.mean_leaf_cost,
        abs_error_bound=epsilon / math.sqrt(delta),
        delta=delta,
    )


def records_frame(records: Sequence[RepRecord]) -> pd.DataFrame:
    return pd.DataFrame.from_records(records, columns=RECORD_COLUMNS)


def write_records_csv(records: Sequence[RepRecord], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_frame(records).to_csv(path, index=False)
    return path


def write_summary_json(document: SummaryDocument, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document.model_dump_json(indent=2) + "\n")
    return path
