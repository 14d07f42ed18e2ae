"""
rnest - Recursive Estimator Tests
---------------------------------
Antithetic differences, cost accounting and unbiasedness of the recursive estimator.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from rnest.core import NestedProblem, OddEvenAccumulator, Trajectory, default_schedule, validate_schedule
from rnest.errors import ContractError
from rnest.problems import GaussianWalk, counting_problem, gaussian_sine_problem
from rnest.read import (
    AntitheticTriple,
    ReadConfig,
    ReadEstimator,
    delta_antithetic,
    estimate_gamma,
    estimate_root,
)
from rnest.runner import run_fixed


def _square(history, z):
    return z * z


def _identity(history, z):
    return z


def test_delta_antithetic_square():
    """Test z^2 with full mean 0 and half means +1/-1 gives -1."""
    triple = AntitheticTriple(1, 0.0, 1.0, -1.0)
    assert delta_antithetic(_square, Trajectory.empty(), triple) == -1.0


def test_delta_antithetic_level_zero():
    assert delta_antithetic(_identity, Trajectory.empty(), AntitheticTriple(0, 3.0)) == 3.0


def test_delta_antithetic_requires_half_means():
    with pytest.raises(ContractError):
        delta_antithetic(_square, Trajectory.empty(), AntitheticTriple(2, 1.0))


def test_triple_from_accumulator():
    acc = OddEvenAccumulator()
    for v in (1.0, 2.0, 3.0, 4.0):
        acc.add(v)
    triple = AntitheticTriple.from_accumulator(2, acc)
    assert triple == AntitheticTriple(2, 2.5, 2.0, 3.0)


def test_triple_from_single_child():
    acc = OddEvenAccumulator()
    acc.add(7.0)
    assert AntitheticTriple.from_accumulator(0, acc) == AntitheticTriple(0, 7.0)


def test_read_config_checks_depth():
    with pytest.raises(ValidationError):
        ReadConfig(problem=gaussian_sine_problem(), schedule=default_schedule(3))


def test_estimate_gamma_checks_history(sine_config):
    with pytest.raises(ContractError):
        estimate_gamma(sine_config, 1, Trajectory.empty(), np.random.default_rng(0))
    with pytest.raises(ContractError):
        estimate_gamma(sine_config, 3, Trajectory.empty(), np.random.default_rng(0))


def test_estimate_is_deterministic_per_stream(sine_config):
    a = estimate_root(sine_config, np.random.default_rng(99))
    b = estimate_root(sine_config, np.random.default_rng(99))
    assert a == b


def test_cost_counters_match_call_counts(counting):
    """Test that leaf_cost counts g_D calls and sim_calls counts simulator calls."""
    config = ReadConfig(problem=counting, schedule=default_schedule(2))
    rng = np.random.default_rng(2024)
    total_leaf = total_sim = 0
    for _ in range(200):
        est = estimate_root(config, rng)
        assert est.leaf_cost >= 1
        assert est.sim_calls >= 3
        total_leaf += est.leaf_cost
        total_sim += est.sim_calls
    assert total_leaf == counting.terminal.calls
    assert total_sim == counting.simulator.calls


def test_leaf_estimate_at_terminal_depth(counting):
    config = ReadConfig(problem=counting, schedule=default_schedule(2))
    history = Trajectory.empty().append(0.0).append(2.0)
    est = estimate_gamma(config, 2, history, np.random.default_rng(5))
    assert est.leaf_cost == 1
    assert est.sim_calls == 1


def test_depth_zero_is_a_plain_draw():
    problem = counting_problem(0)
    config = ReadConfig(problem=problem, schedule=default_schedule(0))
    est = estimate_root(config, np.random.default_rng(1))
    y0 = 1.0 + np.random.default_rng(1).standard_normal()
    assert est.value == pytest.approx(y0)
    assert (est.leaf_cost, est.sim_calls) == (1, 1)


def test_affine_couplings_collapse_to_zero():
    """Test that every level n >= 1 difference vanishes up to rounding for affine g."""
    outputs = []

    def half_plus_state(path, z):
        value = 0.5 * z + path[-1][0]
        outputs.append(value)
        return value

    def last(path):
        return float(path[-1][0])

    problem = NestedProblem(
        name="affine",
        depth=3,
        dim=1,
        simulator=GaussianWalk(mu0=1.0),
        inner=(half_plus_state,) * 3,
        terminal=last,
    )
    config = ReadConfig(problem=problem, schedule=default_schedule(3))
    checked = []

    def observer(depth, triple, delta):
        if triple.n == 0:
            return
        scale = max(1.0, *(abs(v) for v in outputs[-3:]))
        assert abs(delta) <= 2.0**-48 * scale
        checked.append(depth)

    rng = np.random.default_rng(77)
    for _ in range(300):
        estimate_root(config, rng, observer)
    assert checked


def test_observer_sees_every_internal_node(sine_config):
    seen = []
    estimate_root(sine_config, np.random.default_rng(3), lambda d, t, delta: seen.append(d))
    assert seen[-1] == 0
    assert seen.count(0) == 1
    assert set(seen) <= {0, 1}


def test_read_estimator_closure(sine_config):
    estimator = ReadEstimator(sine_config)
    assert estimator.expected_cost == 4.625
    assert estimator.label == "read"
    assert "gaussian-sine" in repr(estimator)
    assert estimator(np.random.default_rng(4)) == estimate_root(sine_config, np.random.default_rng(4))


def test_counting_problem_mean_is_unbiased():
    """Test the sample mean against a_0 = 1.75 for the depth-2 counting problem."""
    problem = counting_problem(2)
    estimator = ReadEstimator(ReadConfig(problem=problem, schedule=default_schedule(2)))
    summary, _ = run_fixed(estimator, 5_000, seed=11)
    assert abs(summary.mean - problem.ground_truth) < 5.0 * summary.se


def test_gaussian_sine_mean_is_unbiased(sine_config):
    summary, _ = run_fixed(ReadEstimator(sine_config), 5_000, seed=21)
    assert abs(summary.mean - math.exp(-0.5)) < 5.0 * summary.se


def test_lbl_schedule_runs(sine_problem):
    schedule = validate_schedule(2, (0.5034, 0.5017), "lbl", delta=0.1)
    est = estimate_root(ReadConfig(problem=sine_problem, schedule=schedule), np.random.default_rng(8))
    assert math.isfinite(est.value)
