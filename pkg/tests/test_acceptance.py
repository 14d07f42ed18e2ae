"""
rnest - Statistical Acceptance Tests
------------------------------------
Long runs against known values. Enabled with ``pytest --runslow``.
"""

import math

import numpy as np
import pytest

from rnest.core import default_schedule, expected_leaf_cost, unchecked_schedule
from rnest.experiments import efficiency_table, fit_slopes, mse_vs_cost_curve, parameter_sweep
from rnest.nmc import NmcAllocation, NmcEstimator, allocate_nmc1, allocate_nmc2
from rnest.problems import counting_problem, get_problem, heavy_tail_problem, sigmoid_problem
from rnest.quadrature import heavy_tail_reference, sigmoid_reference
from rnest.read import ReadConfig, ReadEstimator
from rnest.runner import run_fixed

pytestmark = pytest.mark.slow


def _read(problem, schedule=None):
    return ReadEstimator(ReadConfig(problem=problem, schedule=schedule or default_schedule(problem.depth)))


@pytest.fixture(scope="module")
def bermudan_read():
    """READ on the default five-asset basket put at D = 3."""
    problem = get_problem("bermudan")
    schedule = unchecked_schedule((0.74, 0.6, 0.6))
    summary, _ = run_fixed(_read(problem, schedule), 100_000, seed=17, workers=4)
    return summary


def test_gaussian_sine_interval_covers_truth(sine_config):
    summary, _ = run_fixed(ReadEstimator(sine_config), 100_000, seed=20240101, workers=4)
    assert summary.ci_low < math.exp(-0.5) < summary.ci_high
    assert abs(summary.mean - math.exp(-0.5)) < 4.0 * summary.se
    assert summary.se < 0.002


def test_mean_leaf_cost_matches_formula(sine_config):
    """Test the average leaf cost per repetition against 37/8 within three standard errors."""
    summary, records = run_fixed(ReadEstimator(sine_config), 100_000, seed=7, workers=4)
    costs = np.array([r.leaf_cost for r in records], dtype=np.float64)
    se = costs.std(ddof=1) / math.sqrt(len(costs))
    assert expected_leaf_cost(sine_config.schedule) == 4.625
    assert summary.mean_leaf_cost == pytest.approx(costs.mean())
    assert abs(costs.mean() - 4.625) < 3.0 * se


def test_sigmoid_matches_quadrature():
    reference = sigmoid_reference()
    assert reference == pytest.approx(0.612, abs=0.005)
    summary, _ = run_fixed(_read(sigmoid_problem()), 1_000_000, seed=3, workers=4)
    assert abs(summary.mean - reference) < 4.0 * summary.se
    assert summary.mean == pytest.approx(0.612, abs=0.005)


def test_heavy_tail_matches_reference():
    problem = heavy_tail_problem()
    summary, _ = run_fixed(_read(problem), 50_000, seed=5, workers=4)
    assert abs(summary.mean - heavy_tail_reference()) < 4.0 * summary.se


def test_nmc_converges_on_counting_problem():
    """Test that the plug-in estimator is unbiased when every coupling is affine."""
    problem = counting_problem(2)
    summary, _ = run_fixed(NmcEstimator(problem, allocate_nmc1(64, 2), label="nmc1"), 5_000, seed=2, workers=4)
    assert abs(summary.mean - problem.ground_truth) < 4.0 * summary.se


def test_nmc2_error_falls_with_budget(sine_problem):
    curve = mse_vs_cost_curve(sine_problem, ["nmc2"], [256, 65_536], repetitions=30, seed=13, workers=4)
    small, large = curve["mse"].tolist()
    assert curve["setting"].tolist() == ["counts=16x4x4", "counts=256x16x16"]
    assert large < small


def test_interval_coverage(sine_config):
    """Test that at least 44 of 50 independent 95% intervals cover exp(-1/2)."""
    estimator = ReadEstimator(sine_config)
    covered = 0
    for run in range(50):
        summary, _ = run_fixed(estimator, 10_000, seed=99, workers=4, key=(run,))
        covered += summary.ci_low <= math.exp(-0.5) <= summary.ci_high
    assert covered >= 44


def test_mse_slopes(sine_problem):
    """Test the fitted log-log slopes of READ, NMC1 and NMC2 on a four-point budget grid."""
    curve = mse_vs_cost_curve(
        sine_problem,
        ["read", "nmc1", "nmc2"],
        [1_000, 10_000, 100_000, 1_000_000],
        repetitions=20,
        seed=11,
        workers=4,
    )
    slopes = fit_slopes(curve)
    assert -1.2 <= slopes["read"] <= -0.8
    assert -0.5 <= slopes["nmc1"] <= -0.2
    assert -0.65 <= slopes["nmc2"] <= -0.35


def test_sweep_prefers_larger_outer_rate():
    """Test that the r0 = 0.74 column has a lower mean work-normalized SD than r0 = 0.60."""
    table = parameter_sweep(sigmoid_problem(), (0.60, 0.74), (0.55, 0.60), reps=20_000, seed=31, workers=4)
    by_r0 = table.groupby("r0")["wn_sd"].mean()
    assert by_r0[0.74] < by_r0[0.60]
    assert not table["unvalidated"].any()


def test_read_beats_nmc2_on_time_normalized_error(sine_problem):
    allocation = allocate_nmc2(1e6, 2)
    assert allocation.counts == (1024, 32, 32)
    table = efficiency_table(sine_problem, 100_000, {"nmc2": allocation}, seed=29, workers=1)
    tne = table.set_index("method")["time_normalized_error"]
    assert tne["nmc2"] > 10.0 * tne["read"]


def test_bermudan_price(bermudan_read):
    """Test the default five-asset basket put at D = 3 against its reference price 2.159."""
    assert 1.96 <= bermudan_read.mean <= 2.36


def test_bermudan_nmc_with_few_inner_samples_is_biased_high(bermudan_read):
    """Test that max over noisy continuation values pushes small-N NMC above READ."""
    problem = get_problem("bermudan")
    estimator = NmcEstimator(problem, NmcAllocation(counts=(1, 2, 2, 2)), label="nmc")
    nmc, _ = run_fixed(estimator, 40_000, seed=19, workers=4)
    margin = 3.0 * math.hypot(nmc.se, bermudan_read.se)
    assert nmc.mean > bermudan_read.mean + margin
