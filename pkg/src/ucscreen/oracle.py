"""Ground-truth engines for small instances.

Everything here is deliberately built without the screening or UC model
builders: the region is written in reduced form (injections eliminated,
``flow = H (G g - d)``) and solved with :func:`scipy.optimize.linprog`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import linprog

from .config import FLOW_TOL, ORACLE_TOL, PTDF_TOL
from .grid import Network
from .uncertainty import SetKind, UncertaintySet

REDUNDANT = "Redundant"
IRREDUNDANT = "Irredundant"
MAX_BRUTE_FORCE_UNITS = 12

Dir = tuple[int, int]  # (line index, +1 / -1)


class OracleError(RuntimeError):
    pass


@dataclass
class _Region:
    """``A_ub x <= b_ub``, ``A_eq x == b_eq``, bounds; ``flows = F x``; ``cost = c x``."""

    F: np.ndarray
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    bounds: list
    A_ub: np.ndarray
    b_ub: np.ndarray
    f_max: np.ndarray


def _region(net: Network, uset: UncertaintySet, cost_row: tuple[float, float, float, float] | None = None) -> _Region:
    """Relaxed-UC region over ``x = [g, d, w]``.

    ``cost_row`` is ``(slope, intercept, D_min, D_max)``: adds
    ``c.g - slope * sum(d) <= intercept`` and ``D_min <= sum(d) <= D_max``.
    """
    H = net.require_ptdf()
    M, N = net.M, net.N
    K = uset.K
    n_w = {SetKind.BOX: 0, SetKind.P1: K, SetKind.P2: 2 * K}[uset.kind]
    nx = M + N + n_w
    G = np.zeros((N, M))
    pos = {b.id: i for i, b in enumerate(net.buses)}
    for m, gen in enumerate(net.generators):
        G[pos[gen.bus], m] = 1.0
    F = np.zeros((net.L, nx))
    F[:, :M] = H @ G
    F[:, M : M + N] = -H

    eq_rows, eq_rhs = [], []
    row = np.zeros(nx)
    row[:M], row[M : M + N] = 1.0, -1.0
    eq_rows.append(row)
    eq_rhs.append(0.0)
    bounds = [(0.0, float(gm)) for gm in net.g_max]
    if uset.kind is SetKind.BOX:
        bounds += [(float(lo), float(hi)) for lo, hi in zip(uset.box_min, uset.box_max)]
    else:
        bounds += [(None, None)] * N + [(0.0, 1.0)] * n_w
        for n in range(N):
            row = np.zeros(nx)
            row[M + n] = 1.0
            if uset.kind is SetKind.P1:
                # d_n - d0_n = sum_k (2 w_k - 1) sbar_kn
                row[M + N :] = -2.0 * uset.sbar[:, n]
                eq_rhs.append(uset.d0[n] - uset.sbar[:, n].sum())
            else:
                row[M + N : M + N + K] = -(uset.d0[n] + uset.sbar[:, n])
                row[M + N + K :] = -(uset.d0[n] - uset.sbar[:, n])
                eq_rhs.append(0.0)
            eq_rows.append(row)
        if uset.kind is SetKind.P2:
            row = np.zeros(nx)
            row[M + N :] = 1.0
            eq_rows.append(row)
            eq_rhs.append(1.0)

    ub_rows, ub_rhs = [], []
    c = np.zeros(nx)
    c[:M] = net.cost
    if cost_row is not None:
        slope, intercept, D_lo, D_hi = cost_row
        row = c.copy()
        row[M : M + N] = -slope
        ub_rows.append(row)
        ub_rhs.append(intercept)
        row = np.zeros(nx)
        row[M : M + N] = 1.0
        ub_rows += [row, -row]
        ub_rhs += [D_hi, -D_lo]
    A_ub = np.array(ub_rows).reshape(-1, nx)
    return _Region(F, c, np.array(eq_rows), np.array(eq_rhs), bounds, A_ub, np.array(ub_rhs), net.f_max)


def _limit_rows(reg: _Region, exclude: Iterable[Dir] = (), equal: Iterable[Dir] = ()):
    exclude, equal = set(exclude), set(equal)
    rows, rhs = [reg.A_ub], [reg.b_ub]
    for l in range(reg.F.shape[0]):
        for s in (1, -1):
            if (l, s) in exclude or (l, s) in equal:
                continue
            rows.append(s * reg.F[l][None, :])
            rhs.append([reg.f_max[l]])
    A_ub = np.vstack(rows)
    b_ub = np.concatenate([np.ravel(r) for r in rhs])
    A_eq = np.vstack([reg.A_eq] + [s * reg.F[l][None, :] for l, s in sorted(equal)])
    b_eq = np.concatenate([reg.b_eq, [reg.f_max[l] for l, s in sorted(equal)]])
    return A_ub, b_ub, A_eq, b_eq


def _max_directed_flow(reg: _Region, dr: Dir, exclude: Iterable[Dir] = ()) -> float:
    l, s = dr
    A_ub, b_ub, A_eq, b_eq = _limit_rows(reg, exclude)
    res = linprog(-s * reg.F[l], A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=reg.bounds, method="highs")
    if res.status == 2:
        raise OracleError("region is empty")
    if res.status != 0:
        raise OracleError(f"linprog failed: {res.message}")
    return -res.fun


def _classes(net: Network) -> list[list[Dir]]:
    H = net.require_ptdf()
    f = net.f_max
    dirs = [(l, s) for l in range(net.L) for s in (1, -1)]
    keys = {dr: dr[1] * H[dr[0]] / f[dr[0]] for dr in dirs}
    scale = max(1.0, max(np.abs(k).max() for k in keys.values()))
    classes: list[list[Dir]] = []
    for dr in dirs:
        for cls in classes:
            if np.allclose(keys[cls[0]], keys[dr], rtol=0.0, atol=PTDF_TOL * scale):
                cls.append(dr)
                break
        else:
            classes.append([dr])
    return classes


@dataclass
class OracleVerdict:
    verdicts: dict[Dir, str]
    classes: list[list[Dir]]
    class_verdicts: list[str] = field(default_factory=list)

    def irredundant_classes(self) -> list[list[Dir]]:
        return [c for c, v in zip(self.classes, self.class_verdicts) if v == IRREDUNDANT]

    def irredundant_representatives(self) -> set[Dir]:
        """Lowest member of every irredundant class (the screening tie-break)."""
        return {min(c, key=lambda dr: (dr[0], -dr[1])) for c in self.irredundant_classes()}


def exact_redundancy(
    net: Network,
    uset: UncertaintySet,
    dr: Dir,
    remove: Iterable[Dir] | None = None,
    cost_row=None,
) -> str:
    """Redundant iff the direction's maximum flow, with its own row removed, stays within ``f_max``."""
    reg = _region(net, uset, cost_row)
    exclude = {tuple(dr)} if remove is None else set(map(tuple, remove))
    value = _max_directed_flow(reg, tuple(dr), exclude)
    return REDUNDANT if value <= net.f_max[dr[0]] + ORACLE_TOL * max(1.0, net.f_max[dr[0]]) else IRREDUNDANT


def classify(net: Network, uset: UncertaintySet, cost_row=None) -> OracleVerdict:
    """Member-level and duplicate-class-level redundancy of every direction."""
    classes = _classes(net)
    verdicts = {}
    for l in range(net.L):
        for s in (1, -1):
            verdicts[(l, s)] = exact_redundancy(net, uset, (l, s), cost_row=cost_row)
    class_verdicts = [exact_redundancy(net, uset, cls[0], remove=cls, cost_row=cost_row) for cls in classes]
    return OracleVerdict(verdicts, classes, class_verdicts)


def reachable(net: Network, uset: UncertaintySet, cost_row=None) -> set[Dir]:
    """Directions whose limit can be met with all line limits enforced."""
    reg = _region(net, uset, cost_row)
    out = set()
    for l in range(net.L):
        for s in (1, -1):
            if _max_directed_flow(reg, (l, s)) >= net.f_max[l] - FLOW_TOL:
                out.add((l, s))
    return out


def _jointly_tight(reg: _Region, dirs: Iterable[Dir]) -> bool:
    A_ub, b_ub, A_eq, b_eq = _limit_rows(reg, equal=dirs)
    res = linprog(np.zeros(reg.F.shape[1]), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=reg.bounds, method="highs")
    return res.status == 0


def max_simultaneous_active(net: Network, uset: UncertaintySet, cost_row=None) -> int:
    """Largest number of duplicate classes whose limits can be met at one point.

    Level-wise search: a set can only be jointly tight if all its subsets are.
    """
    reg = _region(net, uset, cost_row)
    reach = reachable(net, uset, cost_row)
    reps = sorted(min(c, key=lambda dr: (dr[0], -dr[1])) for c in _classes(net))
    cand = [dr for dr in reps if dr in reach]
    level = {frozenset([dr]) for dr in cand}
    best = 1 if level else 0
    while level:
        nxt = set()
        for a in level:
            for dr in cand:
                if dr <= max(a):
                    continue
                b = a | {dr}
                if all((b - {x}) in level for x in b) and _jointly_tight(reg, b):
                    nxt.add(b)
        if nxt:
            best = len(next(iter(nxt)))
        level = nxt
    return best


def brute_force_uc(net: Network, demand: np.ndarray, retained: Iterable[Dir] | None = None):
    """Exact UC optimum by enumerating all 2^M commitments with an LP dispatch each.

    Returns ``(cost, u, g)``; ``cost`` is ``inf`` when no commitment is feasible.
    """
    if net.M > MAX_BRUTE_FORCE_UNITS:
        raise OracleError(f"brute force limited to {MAX_BRUTE_FORCE_UNITS} units, got {net.M}")
    H = net.require_ptdf()
    demand = np.asarray(demand, dtype=float)
    G = net.gen_bus
    dirs = [(l, s) for l in range(net.L) for s in (1, -1)] if retained is None else sorted(map(tuple, retained))
    if dirs:
        A_ub = np.array([s * (H[l] @ G) for l, s in dirs])
        b_ub = np.array([net.f_max[l] + s * (H[l] @ demand) for l, s in dirs])
    else:
        A_ub, b_ub = None, None
    best = (np.inf, None, None)
    for u in itertools.product((0, 1), repeat=net.M):
        u = np.array(u, dtype=float)
        bounds = [(lo * on, hi * on) for lo, hi, on in zip(net.g_min, net.g_max, u)]
        res = linprog(
            net.cost, A_ub=A_ub, b_ub=b_ub, A_eq=np.ones((1, net.M)), b_eq=[demand.sum()], bounds=bounds, method="highs"
        )
        if res.status == 0 and res.fun < best[0] - 1e-9:
            best = (float(res.fun), u, res.x)
    return best
