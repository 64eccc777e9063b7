from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucscreen.scenarios import CorrelationSpec, ScenarioSet, generate_correlated
from ucscreen.uncertainty import (
    SetKind,
    UncertaintySet,
    build_set,
    contains,
    empirical_coverage,
    extrema,
    fit_pca,
    project,
    sample_p2,
)

from .conftest import make_network


def rank_one(n_points=50, seed=0):
    t = np.random.default_rng(seed).normal(size=n_points) * 4.0
    t[0] = 10.0  # largest |score|
    axis = np.array([1.0, 1.0]) / np.sqrt(2.0)
    W = np.outer(t, axis)
    return W, np.zeros_like(W)


def fitted(N=4, eta=0.08, seed=1, T=400):
    net = make_network([(i + 1, 50.0 + 20 * i) for i in range(N)], [], [(i + 1, i + 1, i + 2, 1.0, 1.0) for i in range(N - 1)])
    scen = generate_correlated(net, CorrelationSpec(eta, seed=seed, T=T))
    return net, scen, fit_pca(scen)


def test_zero_errors():
    model = fit_pca(np.ones((5, 3)), np.ones((5, 3)))
    np.testing.assert_array_equal(model.eigvals, 0.0)
    np.testing.assert_array_equal(extrema(model, 1), 0.0)
    np.testing.assert_array_equal(project(model, 2), 0.0)


def test_rank_one_direction():
    model = fit_pca(*rank_one())
    np.testing.assert_allclose(np.abs(model.V[:, 0]), [1 / np.sqrt(2)] * 2, atol=1e-12)
    assert model.eigvals[1] == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(project(model, 2), 0.0, atol=1e-9)
    np.testing.assert_allclose(extrema(model, 1), 10.0 * model.V[:, 0], atol=1e-9)


def test_single_row_projection():
    model = fit_pca(np.eye(3), np.zeros((3, 3)))
    v1 = model.V[:, 0]
    direct = fit_pca(np.vstack([v1, np.zeros(3)]), np.zeros((2, 3)))
    assert abs(v1 @ direct.V[:, 0]) == pytest.approx(1.0)
    assert project(direct, 1)[0] == pytest.approx(v1 @ direct.V[:, 0])


def test_k_out_of_range():
    _, _, model = fitted()
    with pytest.raises(ValueError):
        project(model, 0)
    with pytest.raises(ValueError):
        build_set(model, np.zeros(model.N), model.N + 1)


def test_pca_numerics():
    _, _, model = fitted()
    V, lam = model.V, model.eigvals
    assert np.abs(V.T @ V - np.eye(model.N)).max() <= 1e-8
    assert np.all(np.diff(lam) <= 0)
    assert np.abs(V @ np.diag(lam) @ V.T - model.sigma).max() <= 1e-6 * np.abs(model.sigma).max()


def test_covariance_matches_generator_target():
    net, scen, model = fitted(eta=0.035, T=8640)
    target = (0.035 * net.d0) ** 2
    np.testing.assert_allclose(np.diag(model.sigma), target, rtol=0.1)


def test_midpoint_and_far_point():
    _, scen, model = fitted()
    d0 = scen.mu[0]
    for kind in (SetKind.P1, SetKind.P2):
        uset = build_set(model, d0, 2, kind)
        assert contains(uset, d0)
        assert not contains(uset, uset.splus[0] + 2 * uset.sbar[0])


def test_vertices_members_of_both():
    _, scen, model = fitted()
    p1 = build_set(model, scen.mu[0], 3, SetKind.P1)
    p2 = build_set(model, scen.mu[0], 3, SetKind.P2)
    for v in p2.vertices():
        assert contains(p1, v) and contains(p2, v)


def test_p2_inside_p1_sampled(rng):
    _, scen, model = fitted()
    for K in (1, 2, 4):
        p1 = build_set(model, scen.mu[0], K, SetKind.P1)
        p2 = build_set(model, scen.mu[0], K, SetKind.P2)
        pts = sample_p2(p2, 200, rng)
        assert all(contains(p2, p) for p in pts[:20])
        assert all(contains(p1, p) for p in pts)


def test_axis_aligned_p1_is_the_extreme_box():
    rng = np.random.default_rng(3)
    W = rng.normal(size=(500, 2)) * np.array([10.0, 1.0])
    W[:, 1] = 0.0
    W[0] = [0.0, 0.5]
    model = fit_pca(W, np.zeros_like(W))
    p1 = build_set(model, np.zeros(2), 2, SetKind.P1)
    hw = np.abs(W).max(axis=0)
    for sx in (-1, 1):
        for sy in (-1, 1):
            assert contains(p1, np.array([sx * hw[0], sy * hw[1]]))
    assert not contains(p1, np.array([hw[0] * 1.01, 0.0]))


def test_fig1_geometry_rhombus():
    rng = np.random.default_rng(0)
    d0 = np.array([250.0, 300.0])
    Z = rng.normal(size=(400, 2)) * [20.0, 5.0]
    R = np.array([[np.cos(0.6), -np.sin(0.6)], [np.sin(0.6), np.cos(0.6)]])
    model = fit_pca(d0 + Z @ R.T, np.tile(d0, (400, 1)))
    p2 = build_set(model, d0, 2, SetKind.P2)
    verts = p2.vertices()
    centre_offsets = verts - d0
    # vertices come in opposite pairs along the two principal axes
    np.testing.assert_allclose(centre_offsets[0], -centre_offsets[1], atol=1e-9)
    np.testing.assert_allclose(centre_offsets[2], -centre_offsets[3], atol=1e-9)
    for k in range(2):
        assert abs(abs(centre_offsets[2 * k] @ model.V[:, k]) - np.linalg.norm(centre_offsets[2 * k])) < 1e-9
    assert abs(centre_offsets[0] @ centre_offsets[2]) < 1e-6


def test_monotone_in_k(rng):
    _, scen, model = fitted()
    d0 = scen.mu[0]
    for kind in (SetKind.P1, SetKind.P2):
        for K in range(1, model.N):
            small = build_set(model, d0, K, kind)
            big = build_set(model, d0, K + 1, kind)
            pts = sample_p2(build_set(model, d0, K, SetKind.P2), 30, rng) if kind is SetKind.P2 else (
                d0 + (2 * rng.uniform(size=(30, K)) - 1) @ small.sbar
            )
            assert all(contains(big, p) for p in pts)


def test_full_k_p1_covers_history():
    _, _, model = fitted()
    p1 = build_set(model, np.zeros(model.N), model.N, SetKind.P1)
    assert empirical_coverage(p1, model) == 1.0


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_symmetry(x):
    _, scen, model = fitted()
    d0 = scen.mu[0]
    p1 = build_set(model, d0, 2, SetKind.P1)
    offset = np.array(x) @ p1.sbar
    assert contains(p1, d0 + offset) == contains(p1, d0 - offset)


def test_json_round_trip(tmp_path):
    _, scen, model = fitted()
    uset = build_set(model, scen.mu[0], 2, SetKind.P2)
    uset.save(tmp_path / "set.json")
    again = UncertaintySet.load(tmp_path / "set.json")
    np.testing.assert_array_equal(again.sbar, uset.sbar)
    np.testing.assert_array_equal(again.d0, uset.d0)
    assert again.kind is SetKind.P2


def test_dimension_mismatch():
    _, scen, model = fitted()
    with pytest.raises(ValueError):
        contains(build_set(model, scen.mu[0], 1), np.zeros(2))


def test_box_set_requires_bounds():
    with pytest.raises(ValueError):
        build_set(None, np.zeros(2), kind=SetKind.BOX)
    uset = build_set(None, np.zeros(2), kind="box", box=(np.array([-1.0, -1.0]), np.array([1.0, 2.0])))
    assert contains(uset, np.array([1.0, 2.0])) and not contains(uset, np.array([1.1, 0.0]))


def test_degenerate_data_rejected():
    with pytest.raises(ValueError):
        fit_pca(ScenarioSet(np.zeros((2, 2)), np.zeros((2, 2))).W[:1])
