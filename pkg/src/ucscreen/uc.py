"""Single-period unit commitment: full and reduced solves, and the screening evaluation protocol."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import FLOW_TOL
from .costbound import CostBound
from .grid import Network
from .scenarios import ScenarioSet, demand_box
from .screening import Direction, Method, ScreeningProblem, ScreeningResult, all_directions, screen
from .solver import INF, ModelBuilder, SolverConfig, Status, solve
from .uncertainty import SetKind, build_set, fit_pca

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class UcInstance:
    net: Network
    demand: np.ndarray
    retained: frozenset[Direction] | None = None  # None enforces every direction

    def __post_init__(self):
        if self.net.ptdf is None:
            object.__setattr__(self, "net", self.net.with_ptdf())
        demand = np.asarray(self.demand, dtype=float)
        if demand.shape != (self.net.N,):
            raise ValueError(f"demand must have shape ({self.net.N},)")
        object.__setattr__(self, "demand", demand)
        if self.retained is not None:
            valid = set(all_directions(self.net.L))
            if not set(self.retained) <= valid:
                raise ValueError("retained directions reference unknown lines")
            object.__setattr__(self, "retained", frozenset(self.retained))

    @property
    def directions(self) -> list[Direction]:
        if self.retained is None:
            return all_directions(self.net.L)
        return sorted(self.retained)


@dataclass
class UcSolution:
    u: np.ndarray
    g: np.ndarray
    q: np.ndarray
    cost: float
    status: Status
    wall_s: float = 0.0
    build_s: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.GAP_LIMIT)


@dataclass(frozen=True)
class Violation:
    line: object
    dir: str
    magnitude: float


def _build_uc(inst: UcInstance) -> tuple[ModelBuilder, np.ndarray, np.ndarray, np.ndarray]:
    net = inst.net
    H, f = net.ptdf, net.f_max
    m = ModelBuilder()
    u = m.add_vars(net.M, binary=True, name="u")
    g = m.add_vars(net.M, 0.0, net.g_max, name="g")
    q = m.add_vars(net.N, -INF, INF, name="q")
    for i in range(net.M):
        m.add_constraint([g[i], u[i]], [1.0, -net.g_min[i]], ">=", 0.0)
        m.add_constraint([g[i], u[i]], [1.0, -net.g_max[i]], "<=", 0.0)
    G = net.gen_bus
    for n in range(net.N):
        gens = np.flatnonzero(G[n])
        m.add_constraint(np.append(q[n], g[gens]), np.append(1.0, -np.ones(gens.size)), "==", -inst.demand[n])
    m.add_constraint(q, np.ones(net.N), "==", 0.0, name="balance")
    for dr in inst.directions:
        m.add_constraint(q, dr.sign * H[dr.line], "<=", f[dr.line], name=f"flow{dr.symbol}[{dr.line}]")
    m.set_objective(g, net.cost)
    return m, u, g, q


def solve_uc(inst: UcInstance, cfg: SolverConfig | None = None, warm: UcSolution | None = None) -> UcSolution:
    """Minimum-cost commitment and dispatch enforcing only the retained line directions.

    ``warm`` seeds the MILP with a previous commitment (and its dispatch).
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    m, u, g, q = _build_uc(inst)
    if warm is not None and warm.feasible:
        m.hint(u, warm.u)
        m.hint(g, warm.g)
        m.hint(q, warm.q)
    build = time.perf_counter() - t0
    out = solve(m, cfg)
    nan = np.full(inst.net.M, np.nan)
    if not out.has_solution:
        return UcSolution(nan, nan.copy(), np.full(inst.net.N, np.nan), float("nan"), out.status, out.wall_time, build)
    return UcSolution(out.binary(u), out.x[g], out.x[q], float(out.objective), out.status, out.wall_time, build)


def verify_full_feasibility(sol: UcSolution, net: Network, tol: float = FLOW_TOL) -> list[Violation]:
    """Every line direction whose limit the solution exceeds by more than ``tol``."""
    if net.ptdf is None:
        net = net.with_ptdf()
    flows = net.ptdf @ sol.q
    out = []
    for dr in all_directions(net.L):
        excess = dr.sign * flows[dr.line] - net.f_max[dr.line]
        if excess > tol:
            out.append(Violation(net.line_ids[dr.line], dr.symbol, float(excess)))
    return out


# ---------------------------------------------------------------------------
# evaluation protocol


@dataclass
class EvalReport:
    method: str
    n_directions: int
    n_retained: int
    screening_time_s: float
    uc_time_full_s: float
    uc_time_reduced_s: float
    n_infeasible: int
    cost_delta: list[float]
    n_instances: int = 0
    fallback: bool = False
    violations: list[dict] = field(default_factory=list)
    time_aggregation: str = "median"
    bound_mode: str | None = None
    slack_bus: object = None  # PTDF reference bus, recorded for reproducibility

    @property
    def retained_pct(self) -> float:
        return 100.0 * self.n_retained / self.n_directions

    @property
    def uc_time_reduction_pct(self) -> float:
        if self.uc_time_full_s <= 0:
            return 0.0
        return 100.0 * (1.0 - self.uc_time_reduced_s / self.uc_time_full_s)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "retained_pct": self.retained_pct,
            "n_retained": self.n_retained,
            "n_directions": self.n_directions,
            "screening_time_s": self.screening_time_s,
            "uc_time_full_s": self.uc_time_full_s,
            "uc_time_reduced_s": self.uc_time_reduced_s,
            "uc_time_reduction_pct": self.uc_time_reduction_pct,
            "time_aggregation": self.time_aggregation,
            "n_instances": self.n_instances,
            "n_infeasible": self.n_infeasible,
            "fallback": self.fallback,
            "bound_mode": self.bound_mode,
            "slack_bus": self.slack_bus,
            "cost_delta": self.cost_delta,
            "violations": self.violations,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def build_problem(
    net: Network,
    train: ScenarioSet,
    method: Method | str,
    K: int | None = None,
    bound: CostBound | None = None,
    partition=None,
) -> ScreeningProblem:
    """Uncertainty set from training data plus the screening problem for ``method``.

    Box bounds are taken from the network file when present and from the
    training data otherwise; P1/P2 sets are centred on the forecast ``d0``.
    """
    method = Method(method)
    if net.ptdf is None:
        net = net.with_ptdf()
    kind = method.set_kind
    if kind is SetKind.BOX:
        box = (net.d_min, net.d_max) if net.has_demand_bounds else demand_box(train)
        uset = build_set(None, net.d0, kind=kind, box=box)
    else:
        uset = build_set(fit_pca(train), net.d0, K, kind)
    return ScreeningProblem(net, uset, method, bound if method.uses_bound else None, partition)


def evaluate(
    p: ScreeningProblem,
    test: ScenarioSet,
    cfg: SolverConfig | None = None,
    result: ScreeningResult | None = None,
) -> tuple[EvalReport, ScreeningResult]:
    """Screen (unless ``result`` is given), then per test instance solve the reduced UC,
    check it against every line limit, and re-solve the full UC warm-started from it.

    Reduced solutions that violate a dropped limit count toward ``n_infeasible``;
    the full solve is their fallback.
    """
    cfg = cfg or SolverConfig()
    if result is None:
        result = screen(p, cfg)
    net = p.net
    retained = result.umbrella
    t_full, t_red, deltas, violations = [], [], [], []
    n_bad = 0
    for t, demand in enumerate(test.W):
        reduced = solve_uc(UcInstance(net, demand, retained), cfg)
        full = solve_uc(UcInstance(net, demand), cfg, warm=reduced)
        if not full.feasible:
            logger.warning("test instance %d: full UC %s; skipped", t, full.status.value)
            continue
        bad = verify_full_feasibility(reduced, net) if reduced.feasible else []
        if bad or not reduced.feasible:
            n_bad += 1
            violations += [{"instance": t, "line": v.line, "dir": v.dir, "magnitude": v.magnitude} for v in bad]
        t_full.append(full.wall_s)
        t_red.append(reduced.wall_s)
        deltas.append(reduced.cost - full.cost if reduced.feasible else float("nan"))
    report = EvalReport(
        method=p.method.value,
        n_directions=2 * net.L,
        n_retained=result.n_retained,
        screening_time_s=result.screening_time_s,
        uc_time_full_s=float(np.median(t_full)) if t_full else 0.0,
        uc_time_reduced_s=float(np.median(t_red)) if t_red else 0.0,
        n_infeasible=n_bad,
        cost_delta=deltas,
        n_instances=len(deltas),
        fallback=result.fallback,
        violations=violations,
        bound_mode=p.bound.mode if p.bound is not None else None,
        slack_bus=net.slack,
    )
    return report, result


def solve_instances(net: Network, demands: Iterable[np.ndarray], cfg: SolverConfig | None = None) -> list[UcSolution]:
    """Full UC for each demand row (used to build historical cost logs)."""
    return [solve_uc(UcInstance(net, d), cfg) for d in demands]
