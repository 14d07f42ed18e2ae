"""
rnest - Core Tests
------------------
Geometric sampling, schedule validation, cost formulas and trajectories.
"""

import math

import numpy as np
import pytest

from rnest.core import (
    GeometricSchedule,
    OddEvenAccumulator,
    Regime,
    Trajectory,
    default_schedule,
    expected_leaf_cost,
    geometric_pmf,
    implied_k,
    lbl_interval,
    lbs_interval,
    rep_rng,
    sample_geometric,
    split_odd_even,
    unchecked_schedule,
    validate_schedule,
)
from rnest.errors import ContractError, DomainError, ScheduleError


class FixedUniform:
    """Generator stand-in whose random() returns a fixed value."""

    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


def test_geometric_pmf_values():
    """Test P[N = n] = r (1 - r)^n."""
    assert geometric_pmf(0.74, 0) == pytest.approx(0.74)
    assert geometric_pmf(0.6, 2) == pytest.approx(0.6 * 0.4 * 0.4)
    assert geometric_pmf(0.5, 1) == pytest.approx(0.25)


@pytest.mark.parametrize("r,n", [(0.0, 0), (1.0, 0), (0.6, -1)])
def test_geometric_pmf_rejects_bad_arguments(r, n):
    with pytest.raises(DomainError):
        geometric_pmf(r, n)


def test_sample_geometric_inversion():
    """Test that u = 0 gives level 0 and small tails give high levels."""
    assert sample_geometric(0.74, FixedUniform(0.0)) == 0
    # 1 - u = 0.26^3 sits exactly on the boundary of level 3
    assert sample_geometric(0.74, FixedUniform(1.0 - 0.26**3 * 0.999)) == 3


def test_sample_geometric_mean(rng):
    """Test the sample mean against (1 - r) / r."""
    draws = np.array([sample_geometric(0.74, rng) for _ in range(50_000)])
    assert draws.min() == 0
    assert draws.mean() == pytest.approx(0.26 / 0.74, abs=0.02)


@pytest.mark.parametrize("r", [0.55, 0.6, 0.74, 0.9])
def test_geometric_pmf_partial_sums_stay_below_one(r):
    total = math.fsum(geometric_pmf(r, n) for n in range(201))
    assert total <= 1.0
    assert total == pytest.approx(1.0, abs=1e-12)


def test_sample_geometric_branch_factor_mean(rng):
    """Test E[2^N] = r / (2r - 1), which is 37/24 at r = 0.74."""
    draws = np.array([sample_geometric(0.74, rng) for _ in range(400_000)])
    assert np.mean(2.0**draws) == pytest.approx(37.0 / 24.0, rel=0.02)


def test_sample_geometric_same_seed_same_draws():
    first = np.random.default_rng(2024)
    second = np.random.default_rng(2024)
    a = [sample_geometric(0.6, first) for _ in range(200)]
    b = [sample_geometric(0.6, second) for _ in range(200)]
    assert a == b
    other = np.random.default_rng(2025)
    assert a != [sample_geometric(0.6, other) for _ in range(200)]


@pytest.mark.parametrize("r", [0.5, 0.3, 1.0])
def test_sample_geometric_rejects_rates_without_finite_cost(r, rng):
    with pytest.raises(DomainError):
        sample_geometric(r, rng)


def test_implied_k():
    assert implied_k(0.75) == pytest.approx(2.0)
    assert implied_k(0.5) == pytest.approx(1.0)


def test_lbs_intervals():
    """Test upper bounds 2, 4/3 and 8/7 for the first three depths."""
    assert lbs_interval(0) == pytest.approx((1.0, 2.0), abs=1e-9)
    assert lbs_interval(1) == pytest.approx((1.0, 4.0 / 3.0), abs=1e-9)
    assert lbs_interval(2) == pytest.approx((1.0, 8.0 / 7.0), abs=1e-9)


def test_lbl_interval():
    lo, hi = lbl_interval(0, 0.25)
    assert lo == 1.0
    assert hi == pytest.approx(1.045977, abs=1e-6)


def test_lbl_interval_shrinks_with_depth():
    uppers = [lbl_interval(d, 0.1)[1] for d in range(5)]
    assert all(u > 1.0 for u in uppers)
    assert uppers == sorted(uppers, reverse=True)


def test_validate_schedule_accepts_default_rates():
    schedule = validate_schedule(2, (0.74, 0.6), "lbs")
    assert schedule.regime is Regime.LBS
    assert schedule.validated
    assert schedule.depth == 2


def test_validate_schedule_reports_first_failing_depth():
    """Test that r = 0.8 at depth 0 gives k = log2(5), outside (1, 2)."""
    with pytest.raises(ScheduleError) as info:
        validate_schedule(2, (0.8, 0.8), Regime.LBS)
    assert info.value.depth == 0
    assert info.value.k == pytest.approx(math.log2(5.0))
    assert "LBS" in str(info.value)
    assert "depth 0" in str(info.value)


def _rate(k):
    return 1.0 - 2.0 ** (-k)


def _lbl_midpoints(D, delta):
    return [_rate(sum(lbl_interval(d, delta)) / 2.0) for d in range(D)]


@pytest.mark.parametrize("d", [0, 1, 2, 3])
@pytest.mark.parametrize("end", [0, 1])
def test_validate_schedule_lbs_endpoints(d, end):
    """Test that k within 1e-9 inside an LBS endpoint passes and 1e-9 outside fails."""
    rates = list(default_schedule(4).rates)
    edge = lbs_interval(d)[end]
    inward = 1e-9 if end == 0 else -1e-9
    rates[d] = _rate(edge + inward)
    assert validate_schedule(4, rates, Regime.LBS).validated
    rates[d] = _rate(edge - inward)
    with pytest.raises(ScheduleError) as info:
        validate_schedule(4, rates, Regime.LBS)
    assert info.value.depth == d


@pytest.mark.parametrize("d", [0, 1, 2])
@pytest.mark.parametrize("end", [0, 1])
def test_validate_schedule_lbl_endpoints(d, end):
    rates = _lbl_midpoints(3, 0.25)
    edge = lbl_interval(d, 0.25)[end]
    inward = 1e-9 if end == 0 else -1e-9
    rates[d] = _rate(edge + inward)
    assert validate_schedule(3, rates, Regime.LBL, delta=0.25).regime is Regime.LBL
    rates[d] = _rate(edge - inward)
    with pytest.raises(ScheduleError) as info:
        validate_schedule(3, rates, Regime.LBL, delta=0.25)
    assert info.value.depth == d


def test_validate_schedule_rejects_depth_one_rate():
    with pytest.raises(ScheduleError) as info:
        validate_schedule(2, (0.74, 0.65), "lbs")
    assert info.value.depth == 1


def test_validate_schedule_length_mismatch():
    with pytest.raises(DomainError):
        validate_schedule(3, (0.74, 0.6), "lbs")


def test_validate_schedule_delta_rules():
    with pytest.raises(DomainError):
        validate_schedule(1, (0.55,), "lbl")
    with pytest.raises(DomainError):
        validate_schedule(1, (0.55,), "lbl", delta=0.5)
    with pytest.raises(DomainError):
        validate_schedule(1, (0.6,), "lbs", delta=0.25)
    schedule = validate_schedule(1, (0.51,), "lbl", delta=0.25)
    assert schedule.delta == 0.25


def test_unchecked_schedule():
    schedule = unchecked_schedule((0.9, 0.9))
    assert not schedule.validated
    with pytest.raises(DomainError):
        unchecked_schedule((0.9, 0.5))


def test_default_schedules_are_valid():
    assert default_schedule(2).rates == (0.74, 0.6)
    for D in (0, 1, 3, 4):
        schedule = default_schedule(D)
        assert schedule.depth == D
        assert schedule.regime is Regime.LBS
        assert all(0.5 < r < 1.0 for r in schedule.rates)


def test_expected_leaf_cost_is_exact_for_default_schedule():
    """Test (0.74/0.48) * (0.6/0.2) = 37/8 exactly."""
    schedule = default_schedule(2)
    assert expected_leaf_cost(schedule) == 4.625
    assert expected_leaf_cost(schedule, 1) == 3.0
    assert expected_leaf_cost(schedule, 2) == 1.0


def test_expected_leaf_cost_depth_zero():
    assert expected_leaf_cost(GeometricSchedule(rates=())) == 1.0
    with pytest.raises(DomainError):
        expected_leaf_cost(default_schedule(2), 3)


def test_split_odd_even():
    total, odd, even = split_odd_even([1.0, 2.0, 3.0, 4.0])
    assert (total, odd, even) == (10.0, 4.0, 6.0)
    assert total == odd + even


@pytest.mark.parametrize("values", [[1.0], [1.0, 2.0, 3.0], []])
def test_split_odd_even_rejects_bad_lengths(values):
    with pytest.raises(DomainError):
        split_odd_even(values)


def test_odd_even_accumulator_streams():
    acc = OddEvenAccumulator()
    for v in (0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5):
        acc.add(v)
    assert acc.count == 8
    assert acc.odd == 0.5 + 2.5 + 4.5 + 6.5
    assert acc.even == 1.5 + 3.5 + 5.5 + 7.5
    assert acc.total == acc.odd + acc.even


def test_trajectory_append_is_persistent():
    """Test that append leaves the original prefix untouched."""
    base = Trajectory.empty().append(1.0)
    longer = base.append(2.0)
    assert len(base) == 1
    assert len(longer) == 2
    assert longer[0][0] == 1.0
    assert longer.dim == 1
    assert Trajectory.empty().dim is None


def test_trajectory_stages_are_read_only():
    source = np.array([1.0, 2.0])
    path = Trajectory([source])
    source[0] = 99.0
    assert path[0][0] == 1.0
    with pytest.raises(ValueError):
        path[0][0] = 5.0


def test_trajectory_rejects_dimension_change():
    path = Trajectory.empty().append([1.0, 2.0])
    with pytest.raises(ContractError):
        path.append([1.0, 2.0, 3.0])


def test_rep_rng_streams():
    a = rep_rng(7, 3).random(4)
    b = rep_rng(7, 3).random(4)
    c = rep_rng(7, 4).random(4)
    d = rep_rng(7, 3, key=(1,)).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
