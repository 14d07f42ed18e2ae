#!/usr/bin/env python3
"""
rnest - Demo Script
-------------------
Estimates the Gaussian-sine problem with READ and both nested Monte Carlo baselines at
a matched budget and prints each estimate next to the exact value exp(-1/2).
"""

import math
import sys
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from rnest.config import get_settings
from rnest.core import default_schedule
from rnest.log import configure_logging
from rnest.nmc import NmcEstimator, allocate_nmc1, allocate_nmc2
from rnest.problems import gaussian_sine_problem
from rnest.read import ReadConfig, ReadEstimator
from rnest.runner import run_fixed

BUDGET = 100_000


def main():
    """Run the three estimators once each on the same budget."""
    settings = get_settings()
    configure_logging(settings)

    problem = gaussian_sine_problem()
    schedule = default_schedule(problem.depth)
    read = ReadEstimator(ReadConfig(problem=problem, schedule=schedule))
    reps = max(2, round(BUDGET / read.expected_cost))

    print("rnest demo: gaussian-sine, exact value exp(-1/2) = %.6f" % math.exp(-0.5))
    print("=" * 60)

    summary, _ = run_fixed(read, reps, settings.default_seed, settings.default_workers)
    print(f"read   r={schedule.rates}  reps={reps:<7d} estimate={summary.mean:.6f}  se={summary.se:.2e}")

    for key, (name, allocate) in enumerate((("nmc1", allocate_nmc1), ("nmc2", allocate_nmc2)), start=1):
        alloc = allocate(BUDGET, problem.depth)
        nmc, _ = run_fixed(NmcEstimator(problem, alloc, label=name), 1, settings.default_seed, key=(key,))
        print(f"{name}   N={alloc.counts}  estimate={nmc.mean:.6f}")

    print("=" * 60)


if __name__ == "__main__":
    main()
