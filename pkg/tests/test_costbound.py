from __future__ import annotations

import numpy as np
import pytest

from ucscreen.costbound import CostBound, CostSegment, coverage, fit, read_uc_log, write_uc_log


def test_exact_single_line():
    D = np.linspace(100.0, 500.0, 30)
    cb = fit(10.0 + 2.0 * D, D)
    seg = cb.segments[0]
    assert seg.a0 == pytest.approx(10.0, rel=1e-9)
    assert seg.b0 == pytest.approx(2.0, rel=1e-9)
    assert cb.sigma == pytest.approx(0.0, abs=1e-9)
    assert cb.upper_bound(300.0) == pytest.approx(610.0)


def test_two_cluster_recovery():
    lo = np.linspace(1000.0, 2900.0, 20)
    hi = np.linspace(3000.0, 5000.0, 20)
    D = np.concatenate([lo, hi])
    C = np.concatenate([-500.0 + 12.0 * lo, -9000.0 + 15.0 * hi])
    cb = fit(C, D, breakpoints=[3000.0])
    assert [s.b0 for s in cb.segments] == pytest.approx([12.0, 15.0], rel=1e-6)
    assert cb.segments[0].d_max == cb.segments[1].d_min == 3000.0
    assert cb.segment_index(2999.0) == 0 and cb.segment_index(3000.0) == 1


def test_literal_arithmetic_with_published_parameters():
    sigma = 812.5
    cb = CostBound((CostSegment(-1.35e4, 18.9, 0.0, 10000.0),), sigma, delta=3.7, gamma=0.0)
    assert cb.upper_bound(4000.0) == pytest.approx((1 + 3.7 * sigma) * (-1.35e4) + 18.9 * 4000.0)


def test_additive_mode():
    cb = CostBound((CostSegment(-100.0, 2.0, 0.0, 100.0),), 5.0, delta=2.0, gamma=0.5, mode="additive")
    assert cb.upper_bound(10.0) == pytest.approx(-100.0 + 1.5 * 2.0 * 10.0 + 10.0)


def test_affine_in_factors():
    base = CostBound((CostSegment(-40.0, 3.0, 0.0, 100.0),), 2.0)
    values = [base.with_factors(delta=x).upper_bound(50.0) for x in (0.0, 1.0, 2.0)]
    assert values[2] - values[1] == pytest.approx(values[1] - values[0])
    values = [base.with_factors(gamma=x).upper_bound(50.0) for x in (0.0, 0.5, 1.0)]
    assert values[2] - values[1] == pytest.approx(values[1] - values[0])
    assert values[0] < values[1] < values[2]


def test_out_of_span():
    cb = fit([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        cb.upper_bound(3.5)


def test_coverage_properties(rng):
    D = rng.uniform(100, 200, 2000)
    C = 5.0 + 3.0 * D + rng.normal(0, 10.0, D.size)
    cb = fit(C, D, mode="additive")
    assert coverage(cb, C, D) == pytest.approx(0.5, abs=0.1)
    assert coverage(cb.with_factors(delta=50.0), C, D) == 1.0
    assert coverage(fit(C, D, delta=50.0, mode="additive"), C, D) == 1.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"costs": [1.0, 2.0, 3.0], "loads": [1.0, 2.0, 3.0], "breakpoints": [2.5]},  # one point in last segment
        {"costs": [1.0, 2.0], "loads": [5.0, 5.0]},  # no load variance
        {"costs": [1.0, 2.0, 3.0, 4.0], "loads": [1.0, 2.0, 3.0, 4.0], "breakpoints": [3.0, 2.0]},
    ],
)
def test_fit_errors(kwargs):
    with pytest.raises(ValueError):
        fit(**kwargs)


def test_invalid_factors():
    with pytest.raises(ValueError):
        CostBound((CostSegment(0.0, 1.0, 0.0, 1.0),), 1.0, delta=-1.0)
    with pytest.raises(ValueError):
        CostBound((CostSegment(0.0, 1.0, 0.0, 1.0),), 1.0, mode="other")


def test_log_and_json_round_trip(tmp_path):
    D = np.array([1.0, 2.0, 3.0, 4.5])
    C = np.array([3.0, 5.5, 7.0, 10.0])
    write_uc_log(tmp_path / "log.csv", D, C)
    assert (tmp_path / "log.csv").read_text().splitlines()[0] == "total_net_load_mw,total_cost"
    loads, costs = read_uc_log(tmp_path / "log.csv")
    np.testing.assert_array_equal(loads, D)
    cb = fit(costs, loads, delta=1.0, gamma=0.2)
    cb.save(tmp_path / "b.json")
    assert CostBound.load(tmp_path / "b.json") == cb
