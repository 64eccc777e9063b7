from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest

from ucscreen.costbound import CostBound, CostSegment
from ucscreen.oracle import classify, reachable
from ucscreen.screening import (
    Direction,
    Method,
    ScreeningError,
    ScreeningProblem,
    ScreeningResult,
    build_ucd_model,
    discover_umbrella,
    duplicate_classes,
    iteration_table,
    partition_lines,
    screen,
    screen_benchmark,
    screen_decomposed,
)
from ucscreen.solver import SolverConfig
from ucscreen.uncertainty import SetKind, build_set, fit_pca

from .conftest import make_network


def box_problem(net, method=Method.B_UCD, **kw):
    uset = build_set(None, net.d0, kind=SetKind.BOX, box=(net.d_min, net.d_max))
    return ScreeningProblem(net, uset, method, **kw)


def labels(result):
    return [r["label"] for r in result.labels()]


def test_one_line_model_structure(two_bus):
    m, mv = build_ucd_model(box_problem(two_bus(50.0)))
    assert len(mv.v) == 2 and len(mv.z) == 2
    assert sum(m.is_binary) == 2


def test_p1_model_has_k_weights(demo):
    rng = np.random.default_rng(0)
    W = demo.d0 + rng.normal(size=(100, demo.N)) * np.where(demo.d0 > 0, 10.0, 0.0)
    uset = build_set(fit_pca(W, np.tile(demo.d0, (100, 1))), demo.d0, 2, SetKind.P1)
    m, mv = build_ucd_model(ScreeningProblem(demo, uset, Method.D1_UCD))
    assert mv.w.size == 2
    assert all(m.lb[i] == 0.0 and m.ub[i] == 1.0 for i in mv.w)


def test_ed_model_adds_bound_rows(two_bus):
    net = two_bus(50.0)
    bound = CostBound((CostSegment(0.0, 60.0, 0.0, 1000.0),), 0.0)
    plain, _ = build_ucd_model(box_problem(net))
    ed, _ = build_ucd_model(box_problem(net, Method.ED_UCD, bound=bound), segment=0)
    assert ed.num_rows - plain.num_rows == 3
    assert "cost_bound" in ed.row_names


def test_slack_line_is_removable(two_bus):
    result = discover_umbrella(box_problem(two_bus(1e4)))
    assert result.n_retained == 0
    assert result.iterations == []
    assert set(labels(result)) == {"Removable"}


def test_saturating_line_forward_umbrella(two_bus):
    net = two_bus(50.0)
    result = discover_umbrella(box_problem(net))
    assert result.umbrella == {Direction(0, 1)}
    ver = classify(net, box_problem(net).uset)
    assert ver.verdicts[(0, 1)] == "Irredundant" and ver.verdicts[(0, -1)] == "Redundant"


def test_matches_oracle_on_corpus(corpus):
    for net in corpus:
        p = box_problem(net)
        got = {tuple(d) for d in discover_umbrella(p).umbrella}
        assert got == classify(net, p.uset).irredundant_representatives()


def test_benchmark_superset_and_reachability(corpus):
    for net in corpus:
        p = box_problem(net)
        ba = screen_benchmark(p)
        assert discover_umbrella(p).umbrella <= ba.umbrella
        assert {tuple(d) for d in ba.umbrella} == reachable(net, p.uset)


def test_benchmark_slack_line(two_bus):
    assert screen(box_problem(two_bus(1e4), Method.BA)).n_retained == 0


def test_warm_start_does_not_change_labels(corpus):
    for net in corpus[:8]:
        p = box_problem(net)
        on = discover_umbrella(p, SolverConfig(warm_start=True))
        off = discover_umbrella(p, SolverConfig(warm_start=False))
        assert labels(on) == labels(off)


def test_iterations_are_disjoint_and_cover(corpus):
    for net in corpus:
        r = discover_umbrella(box_problem(net))
        found = [d for it in r.iterations for d in it.found]
        assert len(found) == len(set(found))
        assert set(found) == r.umbrella


@pytest.mark.parametrize("n_blocks", [1, 2, 3])
def test_decomposition(corpus, n_blocks):
    for net in corpus:
        p = box_problem(net)
        mono = discover_umbrella(p)
        dec = screen_decomposed(p, SolverConfig(workers=4), n_blocks=min(n_blocks, net.L))
        assert labels(dec) == labels(mono)


def test_random_partition_matches(demo):
    net = demo.with_demand_bounds(0.8 * demo.d0, 1.2 * demo.d0)
    p = box_problem(net)
    perm = np.random.default_rng(3).permutation(net.L)
    part = (tuple(perm[:3]), tuple(perm[3:]))
    assert labels(screen(replace(p, partition=part))) == labels(discover_umbrella(p))


def test_partition_block_sizes():
    assert [len(b) for b in partition_lines(1083, block_size=150)] == [150] * 7 + [33]
    assert [len(b) for b in partition_lines(733, block_size=150)] == [150] * 4 + [133]
    blocks = partition_lines(10, n_blocks=3)
    assert sorted(l for b in blocks for l in b) == list(range(10))
    with pytest.raises(ValueError):
        partition_lines(10, n_blocks=11)


def test_invalid_partition(two_bus):
    with pytest.raises(ScreeningError):
        box_problem(two_bus(50.0), partition=((0,), (0,)))


def test_method_set_mismatch(two_bus):
    net = two_bus(50.0)
    uset = build_set(None, net.d0, kind=SetKind.BOX, box=(net.d_min, net.d_max))
    with pytest.raises(ScreeningError):
        ScreeningProblem(net, uset, Method.D1_UCD)
    with pytest.raises(ScreeningError):
        ScreeningProblem(net, uset, Method.ED_UCD)


def test_nonzero_gap_rejected_for_small_systems(two_bus):
    with pytest.raises(ScreeningError):
        discover_umbrella(box_problem(two_bus(50.0)), SolverConfig(mip_gap=0.01))


def test_duplicate_lines_form_one_class():
    net = make_network(
        [(1, 0.0, 0.0, 0.0), (2, 100.0, 50.0, 100.0)],
        [(1, 1, 0.0, 200.0, 10.0)],
        [(1, 1, 2, 10.0, 30.0), (2, 1, 2, 10.0, 30.0)],
    )
    assert [sorted(c) for c in duplicate_classes(net)] == [
        [Direction(0, 1), Direction(1, 1)],
        [Direction(0, -1), Direction(1, -1)],
    ]
    p = box_problem(net)
    assert discover_umbrella(p).umbrella == {Direction(0, 1)}  # lowest id represents the class
    assert screen_benchmark(p).umbrella == {Direction(0, 1), Direction(1, 1)}


def test_ed_subset_and_fallback(two_bus):
    net = two_bus(50.0)
    p = box_problem(net)
    base = discover_umbrella(p)
    # cheap unit at bus 1 must export 50-100 MW; a bound at the all-local cost (50/MWh) admits it,
    # a bound below the cheapest possible cost (10/MWh) is infeasible
    loose = CostBound((CostSegment(0.0, 60.0, 0.0, 1000.0),), 0.0)
    ed = discover_umbrella(box_problem(net, Method.ED_UCD, bound=loose))
    assert ed.umbrella <= base.umbrella and not ed.fallback
    tight = CostBound((CostSegment(0.0, 5.0, 0.0, 1000.0),), 0.0)
    fb = discover_umbrella(box_problem(net, Method.ED_UCD, bound=tight))
    assert fb.fallback and fb.infeasible
    assert fb.umbrella == base.umbrella


def test_ed_cost_bound_removes_expensive_congestion():
    # the cheap unit sits at the load bus, so saturating the line needs >= 50 MW of the 50/MWh unit
    net = make_network(
        [(1, 0.0, 0.0, 0.0), (2, 100.0, 50.0, 100.0)],
        [(1, 1, 0.0, 200.0, 50.0), (2, 2, 0.0, 200.0, 10.0)],
        [(1, 1, 2, 10.0, 50.0)],
    )
    assert discover_umbrella(box_problem(net)).umbrella == {Direction(0, 1)}
    bound = CostBound((CostSegment(1500.0, 0.0, 0.0, 1000.0),), 0.0)
    ed = discover_umbrella(box_problem(net, Method.ED_UCD, bound=bound))
    assert ed.umbrella == set() and not ed.fallback
    assert classify(net, box_problem(net).uset, cost_row=(0.0, 1500.0, 0.0, 1000.0)).irredundant_classes() == []


def test_result_json(tmp_path, triangle):
    r = discover_umbrella(box_problem(triangle))
    r.save(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert set(data) == {"method", "labels", "iterations", "fallback"}
    assert len(data["labels"]) == 2 * triangle.L
    assert set(data["labels"][0]) == {"line", "dir", "label"}
    assert set(data["iterations"][0]) == {"found", "wall_ms"}
    again = ScreeningResult.load(tmp_path / "r.json", triangle.line_ids)
    assert again.umbrella == r.umbrella


def test_iteration_table_format(corpus):
    p = box_problem(corpus[0])
    table = iteration_table({"b-ucd": discover_umbrella(p), "ba": screen_benchmark(p)})
    rows = table.splitlines()
    assert rows[0].startswith("Iteration number") and rows[0].endswith("Total")
    assert rows[1].startswith("b-ucd")
