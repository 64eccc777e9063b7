"""Line-flow constraint screening.

Umbrella constraint discovery (UCD) solves a sequence of MILPs over the LP
relaxation of the unit-commitment feasible region. Each MILP looks for a
point at which as many line-flow limits as possible are met with equality;
the limits reached there are umbrella constraints and are excluded from the
next search. The loop stops once no further limit can be reached.

Variants differ only in how nodal demand is modelled (box, P1 or P2 set)
and whether a production-cost upper bound is added. The benchmark method
(``ba``) instead maximises and minimises each line flow separately.
"""

from __future__ import annotations

import enum
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .config import FLOW_TOL, PTDF_TOL
from .costbound import CostBound, CostSegment
from .grid import Network
from .solver import INF, ModelBuilder, SolverConfig, Status, solve, solve_lp_relaxation
from .uncertainty import SetKind, UncertaintySet

logger = logging.getLogger(__name__)

UMBRELLA = "Umbrella"
REMOVABLE = "Removable"


class ScreeningError(RuntimeError):
    pass


class Method(str, enum.Enum):
    B_UCD = "b-ucd"
    D1_UCD = "d1-ucd"
    D2_UCD = "d2-ucd"
    ED_UCD = "ed-ucd"
    ED_D1_UCD = "ed-d1-ucd"
    BA = "ba"

    @property
    def set_kind(self) -> SetKind:
        return _SET_KIND[self]

    @property
    def uses_bound(self) -> bool:
        return self in (Method.ED_UCD, Method.ED_D1_UCD)

    @property
    def without_bound(self) -> Method:
        return {Method.ED_UCD: Method.B_UCD, Method.ED_D1_UCD: Method.D1_UCD}.get(self, self)


_SET_KIND = {
    Method.B_UCD: SetKind.BOX,
    Method.D1_UCD: SetKind.P1,
    Method.D2_UCD: SetKind.P2,
    Method.ED_UCD: SetKind.BOX,
    Method.ED_D1_UCD: SetKind.P1,
    Method.BA: SetKind.BOX,
}


class Direction(NamedTuple):
    """Upper (``sign=+1``) or lower (``sign=-1``) flow limit of line index ``line``."""

    line: int
    sign: int

    @property
    def symbol(self) -> str:
        return "+" if self.sign > 0 else "-"


def all_directions(L: int) -> list[Direction]:
    return [Direction(l, s) for l in range(L) for s in (1, -1)]


def duplicate_classes(net: Network, tol: float = PTDF_TOL) -> list[list[Direction]]:
    """Group directions whose half-spaces ``sign * H_l q <= f_l`` coincide.

    Each class is sorted so its first member (lowest line index, ``+``
    before ``-``) is the representative.
    """
    H = net.require_ptdf()
    f = net.f_max
    dirs = all_directions(net.L)
    rows = np.array([d.sign * H[d.line] / f[d.line] for d in dirs])
    scale = max(1.0, np.abs(rows).max(initial=0.0))
    classes: list[list[Direction]] = []
    assigned = np.zeros(len(dirs), dtype=bool)
    for i, d in enumerate(dirs):
        if assigned[i]:
            continue
        same = np.flatnonzero(np.all(np.abs(rows - rows[i]) <= tol * scale, axis=1) & ~assigned)
        assigned[same] = True
        classes.append([dirs[j] for j in same])
    return classes


def _representatives(net: Network) -> tuple[set[Direction], dict[Direction, Direction]]:
    reps, rep_of = set(), {}
    for cls in duplicate_classes(net):
        reps.add(cls[0])
        for d in cls:
            rep_of[d] = cls[0]
    return reps, rep_of


@dataclass(frozen=True, eq=False)
class ScreeningProblem:
    net: Network
    uset: UncertaintySet
    method: Method = Method.B_UCD
    bound: CostBound | None = None
    partition: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.net.ptdf is None:
            object.__setattr__(self, "net", self.net.with_ptdf())
        if self.uset.N != self.net.N:
            raise ScreeningError(f"uncertainty set has N={self.uset.N}, network has N={self.net.N}")
        if self.uset.kind is not self.method.set_kind:
            raise ScreeningError(
                f"method {self.method.value} needs a {self.method.set_kind.value} set, "
                f"got {self.uset.kind.value}"
            )
        if self.method.uses_bound and self.bound is None:
            raise ScreeningError(f"method {self.method.value} needs a cost bound")
        if self.partition is not None:
            blocks = tuple(tuple(int(l) for l in b) for b in self.partition)
            flat = [l for b in blocks for l in b]
            if sorted(flat) != list(range(self.net.L)) or any(not b for b in blocks):
                raise ScreeningError("partition blocks must be non-empty, disjoint and cover all lines")
            object.__setattr__(self, "partition", blocks)


def partition_lines(L: int, n_blocks: int | None = None, block_size: int | None = None) -> tuple[tuple[int, ...], ...]:
    """Contiguous line blocks: ``n_blocks`` near-equal blocks, or fixed ``block_size`` with a remainder block."""
    if (n_blocks is None) == (block_size is None):
        raise ValueError("give exactly one of n_blocks or block_size")
    if block_size is not None:
        if block_size < 1:
            raise ValueError("block_size must be >= 1")
        return tuple(tuple(range(s, min(s + block_size, L))) for s in range(0, L, block_size))
    if not 1 <= n_blocks <= L:
        raise ValueError(f"n_blocks must be in [1, {L}], got {n_blocks}")
    return tuple(tuple(int(i) for i in b) for b in np.array_split(np.arange(L), n_blocks))


@dataclass
class Iteration:
    objective: float
    found: tuple[Direction, ...]
    q: np.ndarray
    wall_s: float
    block: int = 0
    segment: int | None = None


@dataclass
class ScreeningResult:
    method: Method
    line_ids: list
    umbrella: frozenset[Direction]
    iterations: list[Iteration] = field(default_factory=list)
    fallback: bool = False
    infeasible: bool = False
    screening_time_s: float = 0.0

    @property
    def L(self) -> int:
        return len(self.line_ids)

    def label(self, d: Direction) -> str:
        return UMBRELLA if d in self.umbrella else REMOVABLE

    def labels(self) -> list[dict]:
        return [
            {"line": self.line_ids[d.line], "dir": d.symbol, "label": self.label(d)}
            for d in all_directions(self.L)
        ]

    @property
    def n_retained(self) -> int:
        return len(self.umbrella)

    @property
    def retained_pct(self) -> float:
        return 100.0 * self.n_retained / (2 * self.L)

    def counts_per_iteration(self) -> list[int]:
        return [len(it.found) for it in self.iterations]

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "labels": self.labels(),
            "iterations": [
                {
                    "found": [{"line": self.line_ids[d.line], "dir": d.symbol} for d in it.found],
                    "wall_ms": 1000.0 * it.wall_s,
                }
                for it in self.iterations
            ],
            "fallback": self.fallback,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, data: dict, line_ids: Sequence) -> ScreeningResult:
        pos = {lid: i for i, lid in enumerate(line_ids)}
        to_dir = lambda rec: Direction(pos[rec["line"]], 1 if rec["dir"] == "+" else -1)  # noqa: E731
        umbrella = frozenset(to_dir(r) for r in data["labels"] if r["label"] == UMBRELLA)
        its = [
            Iteration(float("nan"), tuple(to_dir(r) for r in it["found"]), np.zeros(0), it["wall_ms"] / 1000.0)
            for it in data.get("iterations", [])
        ]
        return cls(Method(data["method"]), list(line_ids), umbrella, its, bool(data.get("fallback", False)))

    @classmethod
    def load(cls, path: str | Path, line_ids: Sequence) -> ScreeningResult:
        return cls.from_dict(json.loads(Path(path).read_text()), line_ids)


# ---------------------------------------------------------------------------
# model construction


@dataclass
class ModelVars:
    g: np.ndarray
    u: np.ndarray
    d: np.ndarray
    q: np.ndarray
    w: np.ndarray
    v: dict[Direction, int] = field(default_factory=dict)
    z: dict[Direction, int] = field(default_factory=dict)


def big_m(net: Network, cfg: SolverConfig) -> float:
    return cfg.big_m * float(net.f_max.max())


def add_relaxed_region(
    m: ModelBuilder,
    net: Network,
    uset: UncertaintySet,
    bound: CostBound | None = None,
    segment: CostSegment | None = None,
    include_cost_row: bool = True,
) -> ModelVars:
    """Relaxed-commitment UC constraints with demand drawn from ``uset``.

    Rows: nodal injections, balance, generator limits with ``0 <= u <= 1``,
    both limits of every line, the demand set, and optionally the cost
    bound restricted to ``segment``.
    """
    H = net.require_ptdf()
    N, M = net.N, net.M
    g = m.add_vars(M, 0.0, net.g_max, name="g")
    u = m.add_vars(M, 0.0, 1.0, name="u")
    for i in range(M):
        m.add_constraint([g[i], u[i]], [1.0, -net.g_min[i]], ">=", 0.0, name=f"gmin[{i}]")
        m.add_constraint([g[i], u[i]], [1.0, -net.g_max[i]], "<=", 0.0, name=f"gmax[{i}]")

    w = np.zeros(0, dtype=np.int64)
    if uset.kind is SetKind.BOX:
        d = m.add_vars(N, uset.box_min, uset.box_max, name="d")
    else:
        d = m.add_vars(N, -INF, INF, name="d")
        K = uset.K
        if uset.kind is SetKind.P1:
            # d = d0 + sum_k (2 w_k - 1) sbar_k
            w = m.add_vars(K, 0.0, 1.0, name="w")
            rhs = uset.d0 - uset.sbar.sum(axis=0)
            for n in range(N):
                m.add_constraint(np.append(d[n], w), np.append(1.0, -2.0 * uset.sbar[:, n]), "==", rhs[n])
        else:
            # d = sum_k w+_k S+_k + w-_k S-_k,  sum w = 1
            w = m.add_vars(2 * K, 0.0, 1.0, name="w")
            pts = np.concatenate([uset.splus, uset.sminus])
            m.add_constraint(w, np.ones(2 * K), "==", 1.0, name="simplex")
            for n in range(N):
                m.add_constraint(np.append(d[n], w), np.append(1.0, -pts[:, n]), "==", 0.0)

    q = m.add_vars(N, -INF, INF, name="q")
    G = net.gen_bus
    for n in range(N):
        gens = np.flatnonzero(G[n])
        m.add_constraint(
            np.concatenate([[q[n]], g[gens], [d[n]]]),
            np.concatenate([[1.0], -np.ones(gens.size), [1.0]]),
            "==",
            0.0,
            name=f"inj[{n}]",
        )
    m.add_constraint(q, np.ones(N), "==", 0.0, name="balance")
    f = net.f_max
    for l in range(net.L):
        m.add_constraint(q, H[l], "<=", f[l], name=f"flow+[{l}]")
        m.add_constraint(q, H[l], ">=", -f[l], name=f"flow-[{l}]")

    if bound is not None and segment is not None:
        m.add_constraint(d, np.ones(N), ">=", segment.d_min, name="Dmin")
        m.add_constraint(d, np.ones(N), "<=", segment.d_max, name="Dmax")
        if include_cost_row:
            m.add_constraint(
                np.concatenate([g, d]),
                np.concatenate([net.cost, -bound.slope(segment) * np.ones(N)]),
                "<=",
                bound.intercept(segment),
                name="cost_bound",
            )
    return ModelVars(g, u, d, q, w)


def build_ucd_model(
    p: ScreeningProblem,
    fixed: frozenset[Direction] | set[Direction] = frozenset(),
    cfg: SolverConfig | None = None,
    block: Sequence[int] | None = None,
    segment: int | None = None,
    include_cost_row: bool = True,
) -> tuple[ModelBuilder, ModelVars]:
    """UCD MILP for the lines in ``block`` (default: all lines).

    Each direction gets a slack ``z >= f - sign*flow`` and a binary ``v``
    with ``v - z / Omega >= 0``; ``v = 0`` is only possible where the limit
    is reached. Directions in ``fixed`` have ``v`` fixed to 1. The objective
    minimises the sum of ``v`` over the block.
    """
    cfg = cfg or SolverConfig()
    net = p.net
    if p.method.uses_bound and segment is None:
        raise ScreeningError(f"{p.method.value} models are built per cost-bound segment")
    seg = p.bound.segments[segment] if segment is not None else None
    m = ModelBuilder()
    mv = add_relaxed_region(
        m, net, p.uset, p.bound if p.method.uses_bound else None, seg, include_cost_row
    )
    H, f = net.ptdf, net.f_max
    omega = big_m(net, cfg)
    lines = range(net.L) if block is None else block
    for l in lines:
        for sign in (1, -1):
            dr = Direction(l, sign)
            z = m.add_var(0.0, INF, name=f"z{dr.symbol}[{l}]")
            v = m.add_var(binary=True, name=f"v{dr.symbol}[{l}]")
            m.add_constraint(np.append(mv.q, z), np.append(sign * H[l], 1.0), ">=", f[l], name=f"reach{dr.symbol}[{l}]")
            m.add_constraint([v, z], [1.0, -1.0 / omega], ">=", 0.0, name=f"link{dr.symbol}[{l}]")
            if dr in fixed:
                m.fix(v, 1.0)
            mv.v[dr], mv.z[dr] = v, z
    m.set_objective(list(mv.v.values()), np.ones(len(mv.v)))
    return m, mv


def _max_flow_model(p: ScreeningProblem, dr: Direction, segment: int | None, include_cost_row: bool):
    m = ModelBuilder()
    seg = p.bound.segments[segment] if segment is not None else None
    mv = add_relaxed_region(m, p.net, p.uset, p.bound if seg is not None else None, seg, include_cost_row)
    m.set_objective(mv.q, -dr.sign * p.net.ptdf[dr.line])
    return m


def max_flow(
    p: ScreeningProblem,
    dr: Direction,
    cfg: SolverConfig | None = None,
    segment: int | None = None,
    include_cost_row: bool = True,
) -> float | None:
    """Largest ``sign * flow`` of a line over the relaxed region (``None`` if empty)."""
    out = solve_lp_relaxation(_max_flow_model(p, dr, segment, include_cost_row), cfg)
    if out.status is Status.INFEASIBLE:
        return None
    if out.status is not Status.OPTIMAL:
        raise ScreeningError(f"max-flow LP for line {dr.line} ended with {out.status.value}")
    return -out.objective


# ---------------------------------------------------------------------------
# Algorithm 1


@dataclass
class _BlockOutcome:
    umbrella: set[Direction]
    iterations: list[Iteration]
    fallback: bool = False
    infeasible: bool = False


def _hint_from(m: ModelBuilder, mv: ModelVars, x_prev: np.ndarray, prev: ModelVars, p: ScreeningProblem) -> None:
    for name in ("g", "u", "d", "q", "w"):
        m.hint(getattr(mv, name), x_prev[getattr(prev, name)])
    flows = p.net.ptdf @ x_prev[prev.q]
    for dr, v in mv.v.items():
        m.hint([v], [1.0])
        m.hint([mv.z[dr]], [max(0.0, p.net.f_max[dr.line] - dr.sign * flows[dr.line])])


def _discover_block(
    p: ScreeningProblem,
    cfg: SolverConfig,
    block: Sequence[int],
    block_no: int = 0,
    segment: int | None = None,
) -> _BlockOutcome:
    reps, _ = _representatives(p.net)
    block_dirs = [Direction(l, s) for l in block for s in (1, -1)]
    # non-representative duplicates are never umbrella: the representative stands for the class
    fixed = {dr for dr in block_dirs if dr not in reps}
    res = _BlockOutcome(set(), [])
    include_cost_row = True
    prev = None
    f, H = p.net.f_max, p.net.ptdf

    while any(dr not in fixed for dr in block_dirs):
        m, mv = build_ucd_model(p, fixed, cfg, block, segment, include_cost_row)
        if prev is not None and cfg.warm_start:
            _hint_from(m, mv, *prev, p)
        out = solve(m, cfg)
        if out.status is Status.INFEASIBLE:
            if res.iterations:
                raise ScreeningError("UCD model became infeasible after fixing directions")
            if segment is not None and include_cost_row:
                include_cost_row = False
                continue
            if segment is not None:
                logger.info("segment %d: net-load range unreachable within the set", segment)
                break
            raise ScreeningError("screening region is empty (demand set and network infeasible)")
        if not res.iterations and segment is not None and not include_cost_row and not res.fallback:
            logger.warning(
                "%s: cost bound makes segment %d infeasible; screened without it", p.method.value, segment
            )
            res.fallback = res.infeasible = True
        if out.status not in (Status.OPTIMAL, Status.GAP_LIMIT):
            raise ScreeningError(f"UCD MILP ended with status {out.status.value}: {out.message}")

        unfixed = [dr for dr in block_dirs if dr not in fixed]
        vals = dict(zip(unfixed, out.binary([mv.v[dr] for dr in unfixed])))
        zero = [dr for dr in unfixed if vals[dr] == 0]
        unclear = [dr for dr in unfixed if np.isnan(vals[dr])]
        if not zero and not unclear:
            break

        # re-solve as an LP with v fixed to confirm the vertex at LP precision
        t0 = time.perf_counter()
        for dr in unfixed:
            m.fix(mv.v[dr], 0.0 if dr in zero else 1.0)
        polished = solve_lp_relaxation(m, cfg)
        x = polished.x if polished.status is Status.OPTIMAL else out.x
        flows = H @ x[mv.q]
        found = [dr for dr in zero if abs(dr.sign * flows[dr.line] - f[dr.line]) <= FLOW_TOL]
        for dr in [dr for dr in zero if dr not in found] + unclear:
            reach = max_flow(p, dr, cfg, segment, include_cost_row)
            if reach is not None and reach >= f[dr.line] - FLOW_TOL:
                found.append(dr)
        found.sort()
        fixed.update(zero)
        fixed.update(unclear)
        res.umbrella.update(found)
        wall = out.wall_time + time.perf_counter() - t0
        res.iterations.append(Iteration(out.objective, tuple(found), x[mv.q].copy(), wall, block_no, segment))
        prev = (x, mv)
    return res


MAX_N_REQUIRING_ZERO_GAP = 200


def _run_blocks(p: ScreeningProblem, cfg: SolverConfig, blocks) -> ScreeningResult:
    if cfg.mip_gap > 0 and p.net.N <= MAX_N_REQUIRING_ZERO_GAP:
        # a nonzero gap can leave v = 0 unset for a reachable direction
        raise ScreeningError(f"screening needs mip_gap = 0 for N <= {MAX_N_REQUIRING_ZERO_GAP}, got {cfg.mip_gap}")
    t0 = time.perf_counter()
    segments = range(len(p.bound.segments)) if p.method.uses_bound else [None]
    jobs = [(b, block, s) for b, block in enumerate(blocks) for s in segments]

    def run(job):
        b, block, s = job
        return _discover_block(p, cfg, block, b, s)

    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(run, jobs))
    else:
        outcomes = [run(j) for j in jobs]
    umbrella = set().union(*(o.umbrella for o in outcomes))
    iterations = [it for o in outcomes for it in o.iterations]
    return ScreeningResult(
        p.method,
        p.net.line_ids,
        frozenset(umbrella),
        iterations,
        fallback=any(o.fallback for o in outcomes),
        infeasible=any(o.infeasible for o in outcomes),
        screening_time_s=time.perf_counter() - t0,
    )


def discover_umbrella(p: ScreeningProblem, cfg: SolverConfig | None = None) -> ScreeningResult:
    """Iterative umbrella constraint discovery over all lines at once.

    Cost-bounded methods are run once per bound segment and the umbrella
    sets are unioned. If the cost bound makes a segment infeasible, that
    segment is re-screened without the cost row and ``fallback`` is set.
    """
    cfg = cfg or SolverConfig()
    if p.method is Method.BA:
        return screen_benchmark(p, cfg)
    return _run_blocks(p, cfg, [tuple(range(p.net.L))])


def screen_decomposed(
    p: ScreeningProblem, cfg: SolverConfig | None = None, n_blocks: int | None = None
) -> ScreeningResult:
    """UCD with the search split into line blocks; every block sees the full region."""
    cfg = cfg or SolverConfig()
    blocks = p.partition
    if blocks is None:
        if n_blocks is None:
            raise ScreeningError("screen_decomposed needs a partition or n_blocks")
        blocks = partition_lines(p.net.L, n_blocks=n_blocks)
    return _run_blocks(p, cfg, blocks)


def screen_benchmark(p: ScreeningProblem, cfg: SolverConfig | None = None) -> ScreeningResult:
    """Per-line max/min flow LPs over the relaxed region with all limits enforced.

    A direction is retained when its optimum reaches ``f_max - FLOW_TOL``.
    """
    cfg = cfg or SolverConfig()
    if p.method is not Method.BA:
        p = replace(p, method=Method.BA, bound=None)
    t0 = time.perf_counter()
    dirs = all_directions(p.net.L)

    def run(dr):
        value = max_flow(p, dr, cfg)
        if value is None:
            raise ScreeningError("benchmark LP infeasible: demand box and network admit no dispatch")
        return value

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            values = list(pool.map(run, dirs))
    else:
        values = [run(dr) for dr in dirs]
    f = p.net.f_max
    retained = tuple(dr for dr, val in zip(dirs, values) if val >= f[dr.line] - FLOW_TOL)
    wall = time.perf_counter() - t0
    its = [Iteration(float(2 * p.net.L - len(retained)), retained, np.zeros(0), wall)] if retained else []
    return ScreeningResult(Method.BA, p.net.line_ids, frozenset(retained), its, screening_time_s=wall)


def screen(p: ScreeningProblem, cfg: SolverConfig | None = None) -> ScreeningResult:
    """Dispatch on the problem's method and partition."""
    if p.method is Method.BA:
        return screen_benchmark(p, cfg)
    if p.partition is not None:
        return screen_decomposed(p, cfg)
    return discover_umbrella(p, cfg)


def iteration_table(results: dict[str, ScreeningResult]) -> str:
    """Per-iteration counts of newly found umbrella constraints, one row per result."""
    width = max((len(r.iterations) for r in results.values()), default=0)
    name_w = max([len("Iteration number")] + [len(k) for k in results])
    header = "Iteration number".ljust(name_w) + "".join(f"{i + 1:>5}" for i in range(width)) + "  Total"
    lines = [header]
    for name, r in results.items():
        counts = r.counts_per_iteration()
        cells = [f"{c:>5}" for c in counts] + ["   --"] * (width - len(counts))
        lines.append(name.ljust(name_w) + "".join(cells) + f"  {r.n_retained:>5}")
    return "\n".join(lines)
