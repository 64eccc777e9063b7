"""Piecewise-linear upper bound on production cost as a function of total net load."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

MODES = ("literal", "additive")
UC_LOG_COLUMNS = ("total_net_load_mw", "total_cost")


@dataclass(frozen=True)
class CostSegment:
    a0: float
    b0: float
    d_min: float
    d_max: float


@dataclass(frozen=True)
class CostBound:
    """Fitted lines ``a0 + b0 D`` per net-load segment plus conservativeness factors.

    ``mode="literal"`` evaluates ``(1 + delta*sigma) a0 + (1 + gamma) b0 D``;
    ``mode="additive"`` evaluates ``a0 + (1 + gamma) b0 D + delta*sigma``.
    """

    segments: tuple[CostSegment, ...]
    sigma: float
    delta: float = 0.0
    gamma: float = 0.0
    mode: str = "literal"

    def __post_init__(self):
        if not self.segments:
            raise ValueError("cost bound needs at least one segment")
        if self.sigma < 0 or self.delta < 0 or self.gamma < 0:
            raise ValueError("sigma, delta and gamma must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for a, b in zip(self.segments, self.segments[1:]):
            if b.d_min < a.d_max - 1e-9 * max(1.0, abs(a.d_max)):
                raise ValueError("segments must be ordered and non-overlapping")

    @property
    def span(self) -> tuple[float, float]:
        return self.segments[0].d_min, self.segments[-1].d_max

    def with_factors(self, delta: float | None = None, gamma: float | None = None) -> CostBound:
        return replace(
            self,
            delta=self.delta if delta is None else delta,
            gamma=self.gamma if gamma is None else gamma,
        )

    def segment_index(self, D: float) -> int:
        lo, hi = self.span
        if D < lo or D > hi:
            raise ValueError(f"net load {D} MW outside the fitted span [{lo}, {hi}]")
        for i, seg in enumerate(self.segments):
            if D < seg.d_max:
                return i
        return len(self.segments) - 1

    def intercept(self, seg: CostSegment) -> float:
        """Constant term of the bound on ``seg`` (everything except the D term)."""
        if self.mode == "literal":
            return (1.0 + self.delta * self.sigma) * seg.a0
        return seg.a0 + self.delta * self.sigma

    def slope(self, seg: CostSegment) -> float:
        return (1.0 + self.gamma) * seg.b0

    def upper_bound(self, D: float) -> float:
        seg = self.segments[self.segment_index(D)]
        return self.intercept(seg) + self.slope(seg) * D

    def to_dict(self) -> dict:
        return {
            "segments": [
                {"a0": s.a0, "b0": s.b0, "d_min": s.d_min, "d_max": s.d_max} for s in self.segments
            ],
            "sigma": self.sigma,
            "delta": self.delta,
            "gamma": self.gamma,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, data: dict) -> CostBound:
        segs = tuple(CostSegment(s["a0"], s["b0"], s["d_min"], s["d_max"]) for s in data["segments"])
        return cls(segs, data["sigma"], data.get("delta", 0.0), data.get("gamma", 0.0), data.get("mode", "literal"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> CostBound:
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit(
    costs: Sequence[float],
    loads: Sequence[float],
    breakpoints: Sequence[float] = (),
    delta: float = 0.0,
    gamma: float = 0.0,
    mode: str = "literal",
) -> CostBound:
    """Least-squares line per segment; ``sigma`` is the pooled residual standard deviation.

    Segments are ``[min D, bp_1), [bp_1, bp_2), ..., [bp_k, max D]``.
    """
    costs = np.asarray(costs, dtype=float)
    loads = np.asarray(loads, dtype=float)
    if costs.shape != loads.shape or costs.ndim != 1:
        raise ValueError("costs and loads must be 1-D arrays of equal length")
    bps = np.asarray(sorted(breakpoints), dtype=float)
    if not np.array_equal(bps, np.asarray(list(breakpoints), dtype=float)):
        raise ValueError("breakpoints must be sorted")
    edges = np.concatenate([[loads.min()], bps, [loads.max()]])
    which = np.searchsorted(bps, loads, side="right")
    segments = []
    residuals = np.empty_like(costs)
    for s in range(len(edges) - 1):
        mask = which == s
        if mask.sum() < 2:
            raise ValueError(f"segment {s} [{edges[s]}, {edges[s + 1]}) has fewer than 2 samples")
        x, y = loads[mask], costs[mask]
        if np.ptp(x) == 0:
            raise ValueError(f"segment {s}: zero variance in net load, slope undefined")
        A = np.column_stack([np.ones_like(x), x])
        (a0, b0), *_ = np.linalg.lstsq(A, y, rcond=None)
        residuals[mask] = y - (a0 + b0 * x)
        segments.append(CostSegment(float(a0), float(b0), float(edges[s]), float(edges[s + 1])))
    sigma = float(np.sqrt(np.mean(residuals**2)))
    return CostBound(tuple(segments), sigma, delta, gamma, mode)


def coverage(cb: CostBound, costs: Sequence[float], loads: Sequence[float]) -> float:
    """Fraction of historical ``(D, cost)`` points lying on or below the bound."""
    costs = np.asarray(costs, dtype=float)
    loads = np.asarray(loads, dtype=float)
    if costs.size == 0:
        raise ValueError("no data")
    bound = np.array([cb.upper_bound(D) for D in loads])
    return float(np.mean(costs <= bound + 1e-9 * np.maximum(1.0, np.abs(bound))))


def read_uc_log(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(loads, costs)`` from a CSV with columns total_net_load_mw,total_cost."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(UC_LOG_COLUMNS) <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {UC_LOG_COLUMNS}, got {reader.fieldnames}")
        rows = [(float(r[UC_LOG_COLUMNS[0]]), float(r[UC_LOG_COLUMNS[1]])) for r in reader]
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def write_uc_log(path: str | Path, loads: Sequence[float], costs: Sequence[float]) -> None:
    """Cost-versus-load scatter, also usable as the input of :func:`read_uc_log`."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(UC_LOG_COLUMNS)
        for D, c in zip(loads, costs):
            writer.writerow([repr(float(D)), repr(float(c))])
