"""Network data model and DC power-flow sensitivities (PTDF)."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Hashable

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .config import BALANCE_TOL, PTDF_TOL

logger = logging.getLogger(__name__)


class NetworkError(ValueError):
    """Invalid network data or topology."""


class NumericFailure(RuntimeError):
    """A linear-algebra step failed on otherwise valid input."""


@dataclass(frozen=True)
class Bus:
    id: Hashable
    d0: float
    d_min: float | None = None
    d_max: float | None = None

    def __post_init__(self):
        if self.d_min is not None and self.d_max is not None:
            if not self.d_min <= self.d0 <= self.d_max:
                raise NetworkError(
                    f"bus {self.id!r}: require d_min <= d0 <= d_max, got "
                    f"{self.d_min} <= {self.d0} <= {self.d_max}"
                )


@dataclass(frozen=True)
class Generator:
    id: Hashable
    bus: Hashable
    g_min: float
    g_max: float
    cost: float

    def __post_init__(self):
        if not 0.0 <= self.g_min <= self.g_max:
            raise NetworkError(
                f"generator {self.id!r}: require 0 <= g_min <= g_max, got {self.g_min}, {self.g_max}"
            )
        if self.cost < 0:
            raise NetworkError(f"generator {self.id!r}: negative cost {self.cost}")


@dataclass(frozen=True)
class Line:
    id: Hashable
    from_bus: Hashable
    to_bus: Hashable
    susceptance: float
    f_max: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise NetworkError(f"line {self.id!r}: from_bus == to_bus ({self.from_bus!r})")
        if not self.susceptance > 0:
            raise NetworkError(f"line {self.id!r}: susceptance must be > 0, got {self.susceptance}")
        if not self.f_max > 0:
            raise NetworkError(f"line {self.id!r}: f_max must be > 0, got {self.f_max}")


@dataclass(frozen=True, eq=False)
class Network:
    """Buses, generators and lines of a single-period DC unit commitment.

    ``ptdf`` is ``None`` until :func:`compute_ptdf` has been applied via
    :meth:`with_ptdf`. Instances are immutable and safe to share between
    solver workers.
    """

    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    lines: tuple[Line, ...]
    slack: Hashable
    ptdf: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        _validate(self)
        if self.ptdf is not None:
            self.ptdf.setflags(write=False)

    @property
    def N(self) -> int:
        return len(self.buses)

    @property
    def M(self) -> int:
        return len(self.generators)

    @property
    def L(self) -> int:
        return len(self.lines)

    @property
    def bus_index(self) -> dict[Hashable, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def bus_ids(self) -> list:
        return [b.id for b in self.buses]

    @property
    def line_ids(self) -> list:
        return [ln.id for ln in self.lines]

    @property
    def d0(self) -> np.ndarray:
        return np.array([b.d0 for b in self.buses], dtype=float)

    @property
    def has_demand_bounds(self) -> bool:
        return all(b.d_min is not None and b.d_max is not None for b in self.buses)

    @property
    def d_min(self) -> np.ndarray:
        return np.array([np.nan if b.d_min is None else b.d_min for b in self.buses])

    @property
    def d_max(self) -> np.ndarray:
        return np.array([np.nan if b.d_max is None else b.d_max for b in self.buses])

    @property
    def g_min(self) -> np.ndarray:
        return np.array([g.g_min for g in self.generators], dtype=float)

    @property
    def g_max(self) -> np.ndarray:
        return np.array([g.g_max for g in self.generators], dtype=float)

    @property
    def cost(self) -> np.ndarray:
        return np.array([g.cost for g in self.generators], dtype=float)

    @property
    def f_max(self) -> np.ndarray:
        return np.array([ln.f_max for ln in self.lines], dtype=float)

    @property
    def gen_bus(self) -> np.ndarray:
        """N x M incidence: entry (n, m) is 1 when generator m sits at bus n."""
        idx = self.bus_index
        out = np.zeros((self.N, self.M))
        for m, g in enumerate(self.generators):
            out[idx[g.bus], m] = 1.0
        return out

    @property
    def incidence(self) -> np.ndarray:
        """L x N branch-bus incidence (+1 at from bus, -1 at to bus)."""
        idx = self.bus_index
        A = np.zeros((self.L, self.N))
        for l, ln in enumerate(self.lines):
            A[l, idx[ln.from_bus]] = 1.0
            A[l, idx[ln.to_bus]] = -1.0
        return A

    def with_ptdf(self, slack: Hashable | None = None) -> Network:
        """Return a copy carrying the PTDF computed for ``slack`` (default: own slack)."""
        slack = self.slack if slack is None else slack
        return replace(self, slack=slack, ptdf=compute_ptdf(self, slack))

    def with_demand_bounds(self, d_min: np.ndarray, d_max: np.ndarray) -> Network:
        """Replace per-bus demand bounds, widening them if needed to contain d0."""
        buses = tuple(
            replace(b, d_min=float(min(lo, b.d0)), d_max=float(max(hi, b.d0)))
            for b, lo, hi in zip(self.buses, d_min, d_max)
        )
        return replace(self, buses=buses)

    def require_ptdf(self) -> np.ndarray:
        if self.ptdf is None:
            raise NetworkError("PTDF not computed; call Network.with_ptdf() first")
        return self.ptdf


def _validate(net: Network) -> None:
    for kind, items in (("bus", net.buses), ("generator", net.generators), ("line", net.lines)):
        seen = set()
        for item in items:
            if item.id in seen:
                raise NetworkError(f"duplicate id: {kind} {item.id!r}")
            seen.add(item.id)
    if not net.buses:
        raise NetworkError("schema violation: network has no buses")
    bus_ids = {b.id for b in net.buses}
    for g in net.generators:
        if g.bus not in bus_ids:
            raise NetworkError(f"dangling bus reference: generator {g.id!r} at bus {g.bus!r}")
    for ln in net.lines:
        for end in (ln.from_bus, ln.to_bus):
            if end not in bus_ids:
                raise NetworkError(f"dangling bus reference: line {ln.id!r} to bus {end!r}")
    if net.slack not in bus_ids:
        raise NetworkError(f"dangling bus reference: slack {net.slack!r}")


def _require(record: dict, keys: tuple[str, ...], kind: str) -> None:
    if not isinstance(record, dict):
        raise NetworkError(f"schema violation: {kind} record is not an object: {record!r}")
    missing = [k for k in keys if k not in record]
    if missing:
        raise NetworkError(f"schema violation: {kind} record {record!r} missing keys {missing}")


def network_from_dict(data: dict[str, Any]) -> Network:
    """Build a validated :class:`Network` from the JSON document layout."""
    if not isinstance(data, dict):
        raise NetworkError("schema violation: top level must be an object")
    for key in ("buses", "generators", "lines"):
        if not isinstance(data.get(key), list):
            raise NetworkError(f"schema violation: missing list {key!r}")

    buses = []
    for rec in data["buses"]:
        _require(rec, ("id", "d0"), "bus")
        buses.append(
            Bus(
                rec["id"],
                float(rec["d0"]),
                None if rec.get("d_min") is None else float(rec["d_min"]),
                None if rec.get("d_max") is None else float(rec["d_max"]),
            )
        )
    gens = []
    for rec in data["generators"]:
        _require(rec, ("id", "bus", "g_min", "g_max", "cost"), "generator")
        gens.append(
            Generator(rec["id"], rec["bus"], float(rec["g_min"]), float(rec["g_max"]), float(rec["cost"]))
        )
    lines = []
    for rec in data["lines"]:
        _require(rec, ("id", "from", "to", "susceptance", "f_max"), "line")
        lines.append(
            Line(rec["id"], rec["from"], rec["to"], float(rec["susceptance"]), float(rec["f_max"]))
        )
    slack = data.get("slack")
    if slack is None:
        slack = min(b.id for b in buses)
        logger.info("no slack given; using lowest bus id %r", slack)
    return Network(tuple(buses), tuple(gens), tuple(lines), slack)


def network_to_dict(net: Network) -> dict[str, Any]:
    buses = []
    for b in net.buses:
        rec = {"id": b.id, "d0": b.d0}
        if b.d_min is not None:
            rec["d_min"] = b.d_min
        if b.d_max is not None:
            rec["d_max"] = b.d_max
        buses.append(rec)
    return {
        "buses": buses,
        "generators": [
            {"id": g.id, "bus": g.bus, "g_min": g.g_min, "g_max": g.g_max, "cost": g.cost}
            for g in net.generators
        ],
        "lines": [
            {"id": ln.id, "from": ln.from_bus, "to": ln.to_bus, "susceptance": ln.susceptance, "f_max": ln.f_max}
            for ln in net.lines
        ],
        "slack": net.slack,
    }


def load_network(path: str | Path) -> Network:
    """Read and validate a network JSON file. The PTDF is not computed."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise NetworkError(f"schema violation: {path} is not valid JSON ({exc})") from exc
    return network_from_dict(data)


def save_network(net: Network, path: str | Path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=2) + "\n")


def is_connected(net: Network) -> bool:
    idx = net.bus_index
    rows = [idx[ln.from_bus] for ln in net.lines]
    cols = [idx[ln.to_bus] for ln in net.lines]
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(net.N, net.N))
    n_comp, _ = connected_components(adj, directed=False)
    return n_comp == 1


def compute_ptdf(net: Network, slack: Hashable | None = None) -> np.ndarray:
    """PTDF matrix H (L x N) of the DC approximation.

    The nodal susceptance matrix is reduced by deleting the slack row and
    column, Cholesky-factored once and back-solved for all lines. Column
    ``slack`` of the result is identically zero, so flows are ``H @ q`` for
    any balanced injection vector ``q``.
    """
    slack = net.slack if slack is None else slack
    idx = net.bus_index
    if slack not in idx:
        raise NetworkError(f"dangling bus reference: slack {slack!r}")
    if not is_connected(net):
        raise NetworkError("islanded network: the line graph is not connected")

    A = net.incidence
    b = np.array([ln.susceptance for ln in net.lines])
    B = A.T @ (b[:, None] * A)
    keep = np.arange(net.N) != idx[slack]
    H = np.zeros((net.L, net.N))
    if net.N > 1:
        try:
            factor = scipy.linalg.cho_factor(B[np.ix_(keep, keep)])
        except np.linalg.LinAlgError as exc:
            raise NumericFailure(f"reduced susceptance matrix is singular: {exc}") from exc
        # H_red = diag(b) A_red B_red^{-1}, solved as B_red X = (diag(b) A_red)^T.
        H[:, keep] = scipy.linalg.cho_solve(factor, (b[:, None] * A[:, keep]).T).T
    if not np.all(np.isfinite(H)):
        raise NumericFailure("non-finite PTDF entries")
    if np.abs(H).max(initial=0.0) > 1.0 + PTDF_TOL:
        logger.warning("PTDF entries exceed 1 in magnitude (max %.3g)", np.abs(H).max())
    return H


def line_flow(net: Network, q: np.ndarray) -> np.ndarray:
    """Line flows (MW, positive from ``from_bus`` to ``to_bus``) for a balanced injection."""
    q = np.asarray(q, dtype=float)
    if q.shape != (net.N,):
        raise ValueError(f"injection vector must have shape ({net.N},), got {q.shape}")
    if abs(q.sum()) > BALANCE_TOL:
        raise ValueError(f"unbalanced injection vector: sum(q) = {q.sum():.3g} MW")
    return net.require_ptdf() @ q
