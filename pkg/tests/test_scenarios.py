from __future__ import annotations

import numpy as np
import pytest

from ucscreen.scenarios import (
    CorrelationSpec,
    ScenarioSet,
    correlated_covariance,
    demand_box,
    generate_correlated,
    load_scenarios,
    save_scenarios,
)

from .conftest import make_network


@pytest.fixture
def five_bus():
    buses = [(i, d) for i, d in enumerate([250.0, 300.0, 120.0, 80.0, 410.0], start=1)]
    lines = [(i, i, i + 1, 10.0, 100.0) for i in range(1, 5)]
    return make_network(buses, [(1, 1, 0.0, 2000.0, 10.0)], lines)


def test_zero_eta_returns_forecast(five_bus):
    scen = generate_correlated(five_bus, CorrelationSpec(0.0, seed=3, T=50))
    np.testing.assert_array_equal(scen.W, scen.mu)
    np.testing.assert_array_equal(scen.mu[0], five_bus.d0)


def test_diagonal_arithmetic():
    sigma = correlated_covariance(np.array([250.0, 300.0]), 0.1, np.random.default_rng(0))
    np.testing.assert_allclose(np.diag(sigma), [625.0, 900.0])


def test_unit_correlation_diagonal(rng):
    d0 = np.array([10.0, 20.0, 30.0, 40.0])
    sigma = correlated_covariance(d0, 0.2, rng)
    corr = sigma / np.outer(0.2 * d0, 0.2 * d0)
    np.testing.assert_allclose(np.diag(corr), 1.0, atol=1e-12)
    np.testing.assert_allclose(sigma, sigma.T)


def test_deterministic_under_seed(five_bus):
    a = generate_correlated(five_bus, CorrelationSpec(0.05, seed=11, T=20))
    b = generate_correlated(five_bus, CorrelationSpec(0.05, seed=11, T=20))
    np.testing.assert_array_equal(a.W, b.W)


def test_negative_eta_rejected():
    with pytest.raises(ValueError):
        CorrelationSpec(-0.1)


def test_split_sizes_and_disjointness():
    T = 8640
    scen = ScenarioSet(np.arange(T, dtype=float)[:, None], np.zeros((T, 1)))
    train, test = scen.split(7200 / 8640, seed=5)
    assert (train.T, test.T) == (7200, 1440)
    rows = np.concatenate([train.W[:, 0], test.W[:, 0]])
    np.testing.assert_array_equal(np.sort(rows), np.arange(T))


def test_split_deterministic_and_degenerate():
    scen = ScenarioSet(np.arange(10, dtype=float)[:, None], np.zeros((10, 1)))
    a, _ = scen.split(0.5, seed=1)
    b, _ = scen.split(0.5, seed=1)
    np.testing.assert_array_equal(a.timestamps, b.timestamps)
    with pytest.raises(ValueError):
        scen.split(0.01, seed=1)


def test_immutable():
    scen = ScenarioSet(np.zeros((3, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        scen.W[0, 0] = 1.0


def test_csv_round_trip(tmp_path, five_bus):
    scen = generate_correlated(five_bus, CorrelationSpec(0.05, seed=2, T=15))
    save_scenarios(scen, tmp_path, five_bus.bus_ids)
    header = (tmp_path / "observations.csv").read_text().splitlines()[0]
    assert header == "timestamp,bus_1,bus_2,bus_3,bus_4,bus_5"
    again = load_scenarios(tmp_path, five_bus)
    np.testing.assert_array_equal(again.W, scen.W)
    np.testing.assert_array_equal(again.mu, scen.mu)


def test_forecast_defaults_to_nominal(tmp_path, five_bus):
    scen = generate_correlated(five_bus, CorrelationSpec(0.05, seed=2, T=5))
    save_scenarios(scen, tmp_path, five_bus.bus_ids)
    (tmp_path / "forecasts.csv").unlink()
    again = load_scenarios(tmp_path, five_bus)
    np.testing.assert_array_equal(again.mu, np.tile(five_bus.d0, (5, 1)))


def test_column_order_mismatch_is_an_error(tmp_path, five_bus):
    scen = generate_correlated(five_bus, CorrelationSpec(0.05, seed=2, T=5))
    save_scenarios(scen, tmp_path, list(reversed(five_bus.bus_ids)))
    with pytest.raises(ValueError, match="does not match"):
        load_scenarios(tmp_path, five_bus)


def test_demand_box():
    W = np.array([[1.0, 5.0], [3.0, 2.0], [2.0, 4.0]])
    lo, hi = demand_box(ScenarioSet(W, np.zeros_like(W)))
    np.testing.assert_array_equal(lo, [1.0, 2.0])
    np.testing.assert_array_equal(hi, [3.0, 5.0])
