"""
rnest - Command Line Interface
------------------------------
Subcommands:

    estimate   one estimator, fixed repetitions or adaptive stopping
    compare    error-versus-cost curves for READ, NMC1 and NMC2
    sweep      SD and work-normalized SD over an (r0, r1) grid
    price      Bermudan basket put

Settings come from READ_* environment variables, then an optional flat key=value
config file (--config), then flags. The effective configuration is echoed in the log
and in every JSON artifact.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from dotenv import dotenv_values
from pydantic import ValidationError

from rnest import __version__
from rnest.config import get_settings
from rnest.core import GeometricSchedule, NestedProblem, default_schedule, validate_schedule
from rnest.errors import ConfigError, DomainError, RunAbortedError
from rnest.experiments import (
    efficiency_table,
    estimate_scatter,
    fit_slopes,
    mse_vs_cost_curve,
    parameter_sweep,
)
from rnest.log import configure_logging
from rnest.nmc import NmcEstimator, allocate_nmc1, allocate_nmc2
from rnest.problems import PROBLEMS, get_problem
from rnest.quadrature import reference_value
from rnest.read import ReadConfig, ReadEstimator
from rnest.runner import (
    RepRecord,
    run_adaptive,
    run_fixed,
    running_trace,
    write_records_csv,
    write_summary_json,
)
from rnest.schemas import (
    CurveDocument,
    ExperimentConfig,
    PriceRow,
    PriceTable,
    RunSummary,
    SummaryDocument,
)

log = structlog.get_logger(__name__)

DEFAULT_BUDGETS = (1_000, 10_000, 100_000, 1_000_000)
SWEEP_R0 = tuple(np.round(np.linspace(0.60, 0.74, 11), 3))
SWEEP_R1 = tuple(np.round(np.linspace(0.55, 0.60, 11), 3))
DEFAULT_PROBLEM = {"price": "bermudan", "sweep": "sigmoid"}

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_USAGE = 2


def _count(text: str) -> int:
    """Integer flag that also accepts 1e5-style input."""
    try:
        return int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _add_common(parser: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    parser.add_argument("--config", type=Path, default=S, help="flat key=value config file")
    parser.add_argument("--problem", choices=sorted(PROBLEMS), default=S)
    parser.add_argument(
        "--r",
        default=S,
        help="comma-separated rates r_0,...,r_{D-1}; default (0.74,0.6) for D=2, "
        "otherwise the midpoints of the LBS k-intervals",
    )
    parser.add_argument("--regime", choices=["lbs", "lbl", "unchecked"], default=S)
    parser.add_argument("--delta", type=float, default=S, help="LBL moment-loss parameter in (0, 1/2)")
    parser.add_argument("--seed", type=int, default=S)
    parser.add_argument("--workers", type=int, default=S)
    parser.add_argument("--out", type=Path, default=S, help="output directory")
    # problem parameters
    parser.add_argument("--depth", type=int, default=S, help="depth of the counting problem")
    parser.add_argument("--df", type=float, default=S)
    parser.add_argument("--ncp", type=float, default=S)
    parser.add_argument("--assets", type=int, default=S)
    parser.add_argument("--horizon", type=float, default=S)
    parser.add_argument("--steps", type=int, default=S, help="exercise intervals D")
    parser.add_argument("--sigma", type=float, default=S)
    parser.add_argument("--rate", type=float, default=S)
    parser.add_argument("--div", type=float, default=S)
    parser.add_argument("--strike", type=float, default=S)
    parser.add_argument("--spot", default=S, help="comma-separated initial prices")


def _add_repetitions(parser: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    parser.add_argument("--reps", type=_count, default=S, help="fixed number of repetitions")
    parser.add_argument("--epsilon", type=float, default=S, help="adaptive stopping half-width")
    parser.add_argument("--conf", type=float, default=S, help="confidence level in percent")
    parser.add_argument("--min-reps", dest="min_reps", type=_count, default=S)
    parser.add_argument("--max-reps", dest="max_reps", type=_count, default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rnest",
        description="Recursive randomized multilevel Monte Carlo for repeatedly nested expectations.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("estimate", help="run one estimator")
    _add_common(p)
    _add_repetitions(p)
    p.add_argument("--estimator", choices=["read", "nmc1", "nmc2"], default=S)
    p.add_argument("--budget", type=_count, default=S, help="budget for nmc1/nmc2")
    p.add_argument("--trace", action="store_true", default=S, help="also write the running-mean trace")

    p = sub.add_parser("compare", help="MSE against cost for READ and NMC")
    _add_common(p)
    p.add_argument("--estimators", default=S, help="comma-separated subset of read,nmc1,nmc2")
    p.add_argument("--budget-grid", dest="budget_grid", default=S, help="comma-separated budgets")
    p.add_argument("--repetitions", type=int, default=S, help="independent runs per budget")
    p.add_argument("--wall-clock", dest="wall_clock", action="store_true", default=S)
    p.add_argument("--reps", type=_count, default=S, help="READ repetitions for --wall-clock")

    p = sub.add_parser("sweep", help="schedule sweep over (r0, r1)")
    _add_common(p)
    p.add_argument("--r0-grid", dest="r0_grid", default=S)
    p.add_argument("--r1-grid", dest="r1_grid", default=S)
    p.add_argument("--reps", type=_count, default=S, help="repetitions per cell")

    p = sub.add_parser("price", help="Bermudan basket put")
    _add_common(p)
    _add_repetitions(p)
    p.add_argument("--nmc", action="store_true", default=S, help="also run NMC1/NMC2 baselines")
    p.add_argument("--budget", type=_count, default=S, help="budget for the NMC baselines")
    p.add_argument("--nmc-reps", dest="nmc_reps", type=_count, default=S)
    return parser


def _read_config_file(path: Path) -> Dict[str, Any]:
    if not Path(path).is_file():
        raise ConfigError("config", f"no such file: {path}")
    values = {}
    for key, value in dotenv_values(path).items():
        if value is None or value == "":
            continue
        values[key.strip().lower().replace("-", "_")] = value
    values.pop("command", None)
    return values


def _first_error(error: ValidationError) -> Tuple[str, str]:
    first = error.errors()[0]
    field = ".".join(str(part) for part in first["loc"]) or "config"
    return field, first["msg"]


def load_config(command: str, flags: Dict[str, Any], config_path: Optional[Path] = None) -> ExperimentConfig:
    """Merge settings defaults, config-file values and flags, in that order."""
    settings = get_settings()
    values: Dict[str, Any] = {
        "seed": settings.default_seed,
        "workers": settings.default_workers,
        "out": settings.output_dir,
        "conf": settings.confidence * 100.0,
    }
    if command in DEFAULT_PROBLEM:
        values["problem"] = DEFAULT_PROBLEM[command]
    if config_path is not None:
        values.update(_read_config_file(config_path))
    values.update(flags)
    values["command"] = command
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        raise ConfigError(*_first_error(e)) from None


def build_problem(cfg: ExperimentConfig) -> NestedProblem:
    try:
        if cfg.problem == "heavy-tail":
            return get_problem(cfg.problem, df=cfg.df, ncp=cfg.ncp)
        if cfg.problem == "bermudan":
            return get_problem(cfg.problem, params=cfg.gbm_params())
        if cfg.problem == "counting":
            return get_problem(cfg.problem, D=cfg.depth)
        return get_problem(cfg.problem)
    except ValidationError as e:
        raise ConfigError(*_first_error(e)) from None
    except DomainError as e:
        raise ConfigError("problem", str(e)) from None


def build_schedule(cfg: ExperimentConfig, problem: NestedProblem) -> GeometricSchedule:
    """Validated schedule from the flags, or the problem's default."""
    D = problem.depth
    if cfg.r is not None:
        rates, regime = cfg.r, cfg.regime or "lbs"
    elif problem.name == "bermudan":
        # max-type couplings; cost-matched rates outside the proven ranges
        rates, regime = (0.74,) + (0.6,) * (D - 1), cfg.regime or "unchecked"
    else:
        rates, regime = default_schedule(D).rates, cfg.regime or "lbs"
    return validate_schedule(D, rates, regime, cfg.delta if regime == "lbl" else None)


def _nmc_allocation(name: str, cfg: ExperimentConfig, problem: NestedProblem):
    if cfg.budget is None:
        raise ConfigError("budget", f"{name} needs --budget")
    allocate = allocate_nmc1 if name == "nmc1" else allocate_nmc2
    return allocate(cfg.budget, problem.depth)


def _run(estimator, cfg: ExperimentConfig) -> Tuple[RunSummary, List[RepRecord]]:
    rule = cfg.stopping_rule()
    if rule is None:
        return run_fixed(estimator, cfg.reps, cfg.seed, cfg.workers, confidence=cfg.conf / 100.0)
    records: List[RepRecord] = []
    summary = run_adaptive(estimator, rule, cfg.seed, cfg.workers, records_out=records)
    return summary, records


def _print_summary(label: str, summary: RunSummary) -> None:
    if summary.mean is None:
        print(f"{label}: no repetitions completed")
    elif summary.se is None:
        print(f"{label}: mean = {summary.mean:.6f} (n = {summary.n}, interval undefined)")
    else:
        print(
            f"{label}: mean = {summary.mean:.6f}  se = {summary.se:.3g}  "
            f"{summary.confidence:.0%} CI [{summary.ci_low:.6f}, {summary.ci_high:.6f}]  (n = {summary.n})"
        )
    print(f"  total leaf cost = {summary.total_leaf_cost}  simulator calls = {summary.total_sim_calls}")
    if summary.converged is False:
        print("  stopping rule NOT satisfied before max-reps")


def _exit_status(summary: RunSummary) -> int:
    if summary.aborted or summary.converged is False:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_estimate(cfg: ExperimentConfig) -> int:
    problem = build_problem(cfg)
    schedule = None
    if cfg.estimator == "read":
        schedule = build_schedule(cfg, problem)
        estimator = ReadEstimator(ReadConfig(problem=problem, schedule=schedule))
    else:
        estimator = NmcEstimator(problem, _nmc_allocation(cfg.estimator, cfg, problem), label=cfg.estimator)

    try:
        summary, records = _run(estimator, cfg)
    except RunAbortedError as e:
        summary, records = e.summary, e.records

    document = SummaryDocument(
        config=cfg,
        estimator=cfg.estimator,
        schedule=list(schedule.rates) if schedule else None,
        regime=schedule.regime.value if schedule else None,
        summary=summary,
    )
    write_summary_json(document, cfg.out / "estimate_summary.json")
    write_records_csv(records, cfg.out / "estimate_records.csv")
    if cfg.trace:
        running_trace(records, summary.confidence).to_csv(cfg.out / "estimate_trace.csv", index=False)
    _print_summary(f"{cfg.estimator} on {problem.name}", summary)
    return _exit_status(summary)


def cmd_compare(cfg: ExperimentConfig) -> int:
    problem = build_problem(cfg)
    schedule = build_schedule(cfg, problem)
    budgets = cfg.budget_grid or DEFAULT_BUDGETS
    cfg.out.mkdir(parents=True, exist_ok=True)

    truth = reference_value(problem)
    if truth is None:
        scatter = estimate_scatter(
            problem, cfg.estimators, budgets, cfg.repetitions, cfg.seed, cfg.workers, schedule
        )
        scatter.to_csv(cfg.out / "compare_scatter.csv", index=False)
        print(scatter.groupby(["estimator", "budget"])["estimate"].agg(["mean", "std"]).to_string())
        return EXIT_OK

    curve = mse_vs_cost_curve(
        problem, cfg.estimators, budgets, cfg.repetitions, cfg.seed, cfg.workers, schedule, truth
    )
    curve.to_csv(cfg.out / "compare_curve.csv", index=False)
    slopes = fit_slopes(curve)
    document = CurveDocument(config=cfg, truth=truth, slopes=slopes)
    (cfg.out / "compare_slopes.json").write_text(document.model_dump_json(indent=2) + "\n")
    print(curve.to_string(index=False))
    for name, slope in slopes.items():
        print(f"  slope[{name}] = {slope:.3f}")

    if cfg.wall_clock:
        top = max(budgets)
        allocations = {
            "nmc1": allocate_nmc1(top, problem.depth),
            "nmc2": allocate_nmc2(top, problem.depth),
        }
        table = efficiency_table(
            problem, cfg.reps or 100_000, allocations, cfg.seed, cfg.workers, schedule, truth
        )
        table.to_csv(cfg.out / "compare_efficiency.csv", index=False)
        print(table.to_string(index=False))
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig) -> int:
    problem = build_problem(cfg)
    if problem.depth != 2:
        raise ConfigError("problem", f"sweep needs a depth-2 problem, '{problem.name}' has depth {problem.depth}")
    table = parameter_sweep(
        problem,
        cfg.r0_grid or SWEEP_R0,
        cfg.r1_grid or SWEEP_R1,
        cfg.reps or 10_000,
        cfg.seed,
        cfg.workers,
    )
    cfg.out.mkdir(parents=True, exist_ok=True)
    table.to_csv(cfg.out / "sweep.csv", index=False)
    print(table.pivot(index="r0", columns="r1", values="wn_sd").round(4).to_string())
    return EXIT_OK


def cmd_price(cfg: ExperimentConfig) -> int:
    if cfg.problem != "bermudan":
        raise ConfigError("problem", "price only runs the bermudan problem")
    problem = build_problem(cfg)
    schedule = build_schedule(cfg, problem)
    estimator = ReadEstimator(ReadConfig(problem=problem, schedule=schedule))
    try:
        summary, _ = _run(estimator, cfg)
    except RunAbortedError as e:
        summary = e.summary

    rows = [
        PriceRow(
            method="read",
            setting="r=(" + ", ".join(f"{r:g}" for r in schedule.rates) + ")",
            cost=summary.total_leaf_cost,
            time=summary.wall_time,
            estimate=summary.mean,
            se=summary.se,
        )
    ]
    if cfg.nmc:
        for name in ("nmc1", "nmc2"):
            alloc = _nmc_allocation(name, cfg, problem)
            nmc_summary, _ = run_fixed(
                NmcEstimator(problem, alloc, label=name), cfg.nmc_reps, cfg.seed, cfg.workers, key=(len(rows),)
            )
            rows.append(
                PriceRow(
                    method=name,
                    setting="N=(" + ", ".join(str(c) for c in alloc.counts) + ")",
                    cost=nmc_summary.total_leaf_cost,
                    time=nmc_summary.wall_time,
                    estimate=nmc_summary.mean,
                    se=nmc_summary.se,
                )
            )

    document = SummaryDocument(
        config=cfg,
        estimator="read",
        schedule=list(schedule.rates),
        regime=schedule.regime.value,
        summary=summary,
    )
    write_summary_json(document, cfg.out / "price_summary.json")
    (cfg.out / "price_table.json").write_text(
        PriceTable(config=cfg, rows=rows).model_dump_json(indent=2) + "\n"
    )
    for row in rows:
        estimate = "n/a" if row.estimate is None else f"{row.estimate:.4f}"
        se = "n/a" if row.se is None else f"{row.se:.4f}"
        print(f"{row.method:5s} {row.setting:24s} cost={row.cost:<12d} time={row.time:8.2f}s  "
              f"estimate={estimate} (se {se})")
    return _exit_status(summary)


HANDLERS: Dict[str, Callable[[ExperimentConfig], int]] = {
    "estimate": cmd_estimate,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "price": cmd_price,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one subcommand and return its exit status."""
    args = build_parser().parse_args(argv)
    configure_logging(get_settings())

    flags = vars(args)
    command = flags.pop("command")
    config_path = flags.pop("config", None)
    try:
        cfg = load_config(command, flags, config_path)
        log.info("effective_config", **cfg.model_dump(mode="json"))
        return HANDLERS[command](cfg)
    except ConfigError as e:
        log.error("config_error", field=e.field, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as e:
        log.error("validation_error", error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RunAbortedError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
