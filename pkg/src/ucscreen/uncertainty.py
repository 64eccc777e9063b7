"""PCA of forecast errors and the box / polyhedral uncertainty sets built from it.

Two data-driven sets are supported, both recentred on the forecast ``d0``
and spanned by the extreme principal-component projections ``sbar_k``:

* ``p1``: ``d = d0 + sum_k (2 w_k - 1) sbar_k`` with ``0 <= w_k <= 1``
  (a box in principal-component coordinates);
* ``p2``: the convex hull of the ``2K`` points ``d0 +/- sbar_k``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import EIG_CLAMP_TOL, MEMBERSHIP_TOL
from .scenarios import ScenarioSet
from .solver import INF, ModelBuilder, SolverConfig, Status, solve


class SetKind(str, enum.Enum):
    BOX = "box"
    P1 = "p1"
    P2 = "p2"


@dataclass(frozen=True, eq=False)
class PcaModel:
    sigma: np.ndarray  # N x N covariance (MW^2)
    V: np.ndarray  # columns are orthonormal eigenvectors
    eigvals: np.ndarray  # descending
    Wc: np.ndarray  # T x N centred data

    @property
    def N(self) -> int:
        return self.sigma.shape[0]

    def explained_fraction(self) -> np.ndarray:
        total = self.eigvals.sum()
        if total <= 0:
            return np.zeros_like(self.eigvals)
        return np.cumsum(self.eigvals) / total


def fit_pca(scen: ScenarioSet | np.ndarray, mu: np.ndarray | None = None) -> PcaModel:
    """Eigen-decompose the forecast-error covariance ``Wc^T Wc / (T - 1)``.

    Accepts a :class:`ScenarioSet` or raw ``W`` (with ``mu``) arrays. The
    errors are assumed unbiased, so no column mean is removed.
    """
    if isinstance(scen, ScenarioSet):
        Wc = scen.errors
    else:
        W = np.asarray(scen, dtype=float)
        Wc = W - (0.0 if mu is None else np.asarray(mu, dtype=float))
    if Wc.ndim != 2 or Wc.shape[0] < 2:
        raise ValueError(f"need a T x N matrix with T >= 2, got shape {Wc.shape}")
    if not np.all(np.isfinite(Wc)):
        raise ValueError("non-finite values in scenario data")
    T = Wc.shape[0]
    sigma = Wc.T @ Wc / (T - 1)
    sigma = 0.5 * (sigma + sigma.T)
    lam, V = np.linalg.eigh(sigma)
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], V[:, order]
    floor = -EIG_CLAMP_TOL * max(1.0, np.abs(sigma).max(initial=0.0))
    if lam.size and lam[-1] < floor:
        raise ValueError(f"covariance has a negative eigenvalue {lam[-1]:.3g}")
    lam = np.where(lam < 0, 0.0, lam)
    # deterministic sign: largest-magnitude entry of each eigenvector is positive
    pivots = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[pivots, np.arange(V.shape[1])])
    for arr in (sigma, V, lam, Wc):
        arr.setflags(write=False)
    return PcaModel(sigma, V, lam, Wc)


def _check_k(model: PcaModel, k: int) -> None:
    if not 1 <= k <= model.N:
        raise ValueError(f"component index k must be in [1, {model.N}], got {k}")


def project(model: PcaModel, k: int) -> np.ndarray:
    """Scores ``Wc @ V_k`` of the data on the k-th (1-based) component."""
    _check_k(model, k)
    return model.Wc @ model.V[:, k - 1]


def extrema(model: PcaModel, k: int) -> np.ndarray:
    """``max_t |Z_k(t)| * V_k``: the extreme projection in bus coordinates."""
    z = project(model, k)
    return np.abs(z).max(initial=0.0) * model.V[:, k - 1]


@dataclass(frozen=True, eq=False)
class UncertaintySet:
    kind: SetKind
    d0: np.ndarray
    sbar: np.ndarray | None = None  # K x N, used by p1/p2
    box_min: np.ndarray | None = None
    box_max: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SetKind(self.kind))
        d0 = np.array(self.d0, dtype=float)
        object.__setattr__(self, "d0", d0)
        if self.kind is SetKind.BOX:
            if self.box_min is None or self.box_max is None:
                raise ValueError("box set needs box_min and box_max")
            lo, hi = np.array(self.box_min, dtype=float), np.array(self.box_max, dtype=float)
            if lo.shape != d0.shape or hi.shape != d0.shape or np.any(lo > hi):
                raise ValueError("box bounds must match d0 and satisfy box_min <= box_max")
            object.__setattr__(self, "box_min", lo)
            object.__setattr__(self, "box_max", hi)
        else:
            sbar = np.atleast_2d(np.array(self.sbar, dtype=float))
            if sbar.shape[1] != d0.size or not 1 <= sbar.shape[0] <= d0.size:
                raise ValueError(f"sbar must be K x N with 1 <= K <= N, got {sbar.shape}")
            object.__setattr__(self, "sbar", sbar)

    @property
    def N(self) -> int:
        return self.d0.size

    @property
    def K(self) -> int:
        return 0 if self.sbar is None else self.sbar.shape[0]

    @property
    def splus(self) -> np.ndarray:
        return self.d0 + self.sbar

    @property
    def sminus(self) -> np.ndarray:
        return self.d0 - self.sbar

    def vertices(self) -> np.ndarray:
        """The 2K points ``d0 +/- sbar_k`` (rows), ordered +1, -1, +2, -2, ..."""
        if self.kind is SetKind.BOX:
            raise ValueError("vertices() is defined for p1/p2 sets")
        return np.stack([self.splus, self.sminus], axis=1).reshape(-1, self.N)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind is SetKind.BOX:
            return self.box_min, self.box_max
        half = np.abs(self.sbar).sum(axis=0)
        if self.kind is SetKind.P2:
            half = np.abs(self.sbar).max(axis=0)
        return self.d0 - half, self.d0 + half

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "d0": self.d0.tolist(), "K": self.K}
        if self.kind is SetKind.BOX:
            out["box_min"] = self.box_min.tolist()
            out["box_max"] = self.box_max.tolist()
        else:
            out["sbar"] = self.sbar.tolist()
            out["splus"] = self.splus.tolist()
            out["sminus"] = self.sminus.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> UncertaintySet:
        kind = SetKind(data["kind"])
        if kind is SetKind.BOX:
            return cls(kind, data["d0"], box_min=data["box_min"], box_max=data["box_max"])
        if "sbar" in data:
            sbar = data["sbar"]
        else:
            sbar = 0.5 * (np.asarray(data["splus"]) - np.asarray(data["sminus"]))
        return cls(kind, data["d0"], sbar=sbar)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> UncertaintySet:
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_set(
    model: PcaModel | None,
    d0: np.ndarray,
    K: int | None = None,
    kind: SetKind | str = SetKind.P1,
    box: tuple[np.ndarray, np.ndarray] | None = None,
) -> UncertaintySet:
    """Construct a box, P1 or P2 set. ``K`` defaults to all components."""
    kind = SetKind(kind)
    d0 = np.asarray(d0, dtype=float)
    if kind is SetKind.BOX:
        if box is None:
            raise ValueError("box bounds are required for a box set")
        return UncertaintySet(kind, d0, box_min=box[0], box_max=box[1])
    if model is None:
        raise ValueError(f"{kind.value} set needs a fitted PCA model")
    K = model.N if K is None else int(K)
    if not 1 <= K <= model.N:
        raise ValueError(f"K must be in [1, {model.N}], got {K}")
    if d0.shape != (model.N,):
        raise ValueError(f"d0 must have shape ({model.N},)")
    sbar = np.stack([extrema(model, k) for k in range(1, K + 1)])
    return UncertaintySet(kind, d0, sbar=sbar)


def components_for_fraction(n: int, fraction: float) -> int:
    """Number of retained components for a percentage sweep (at least one)."""
    return int(min(n, max(1, round(fraction * n))))


def contains(uset: UncertaintySet, d: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
    """Membership of ``d`` via an LP over the set's weight variables.

    The LP minimises the largest absolute residual of the defining equality;
    ``d`` is a member when it is at most ``tol * max(1, |d|_inf)``.
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (uset.N,):
        raise ValueError(f"point must have shape ({uset.N},), got {d.shape}")
    scale = max(1.0, np.abs(d).max(initial=0.0))
    if uset.kind is SetKind.BOX:
        return bool(np.all(d >= uset.box_min - tol * scale) and np.all(d <= uset.box_max + tol * scale))

    m = ModelBuilder()
    K = uset.K
    t = m.add_var(0.0, INF, name="resid")
    if uset.kind is SetKind.P1:
        w = m.add_vars(K, 0.0, 1.0, name="w")
        # d0 + sum_k (2 w_k - 1) sbar_k - d = r,  |r| <= t
        base = uset.d0 - uset.sbar.sum(axis=0) - d
        coef = 2.0 * uset.sbar.T
        idx = w
    else:
        wp = m.add_vars(K, 0.0, 1.0, name="w_plus")
        wm = m.add_vars(K, 0.0, 1.0, name="w_minus")
        idx = np.concatenate([wp, wm])
        m.add_constraint(idx, np.ones(2 * K), "==", 1.0, name="simplex")
        base = -d
        coef = np.hstack([uset.splus.T, uset.sminus.T])
    for n in range(uset.N):
        cols = np.append(idx, t)
        m.add_constraint(cols, np.append(coef[n], -1.0), "<=", -base[n])
        m.add_constraint(cols, np.append(coef[n], 1.0), ">=", -base[n])
    m.set_objective([t], [1.0])
    out = solve(m, SolverConfig())
    if out.status is not Status.OPTIMAL:
        return False
    return bool(out.objective <= tol * scale)


def sample_p2(uset: UncertaintySet, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random convex combinations of the 2K vertices (flat Dirichlet weights)."""
    weights = rng.dirichlet(np.ones(2 * uset.K), size=n)
    return weights @ uset.vertices()


def empirical_coverage(uset: UncertaintySet, model: PcaModel) -> float:
    """Fraction of recentred historical points ``d0 + Wc_t`` inside the set."""
    pts = uset.d0 + model.Wc
    return float(np.mean([contains(uset, p) for p in pts]))
