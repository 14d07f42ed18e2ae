"""
rnest - Exceptions
------------------
Exception hierarchy shared by the estimators, the runner and the CLI.
"""

from typing import Any, List, Optional, Tuple


class RneError(Exception):
    """Base class for every error raised by rnest."""


class DomainError(RneError, ValueError):
    """An argument lies outside its mathematical domain."""


class ScheduleError(DomainError):
    """A geometric rate falls outside the admissible interval of its regime."""

    def __init__(self, depth: int, k: float, interval: Tuple[float, float], regime: str):
        self.depth = depth
        self.k = k
        self.interval = interval
        self.regime = regime
        lo, hi = interval
        super().__init__(
            f"{regime} schedule rejected at depth {depth}: "
            f"k_{depth} = {k:.6g} not in open interval ({lo:.6g}, {hi:.6g})"
        )


class ContractError(RneError):
    """A caller broke a structural precondition (depth/history mismatch and the like)."""


class ConfigError(RneError):
    """An experiment configuration is invalid."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"invalid configuration for '{field}': {message}")


class RunAbortedError(RneError):
    """A repetition failed; the records finished before the failure are kept."""

    def __init__(self, records: List[Any], cause: BaseException, summary: Optional[Any] = None):
        self.records = records
        self.cause = cause
        self.summary = summary
        super().__init__(f"run aborted after {len(records)} repetitions: {cause!r}")
