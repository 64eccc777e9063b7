"""Residual-demand time series: storage, CSV I/O and synthetic correlated generation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Network

OBSERVATIONS_CSV = "observations.csv"
FORECASTS_CSV = "forecasts.csv"


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Observed residual demand ``W`` and its forecasts ``mu``, both T x N (MW)."""

    W: np.ndarray
    mu: np.ndarray
    timestamps: np.ndarray = field(default=None)

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        mu = np.array(self.mu, dtype=float)
        if W.ndim != 2 or W.shape != mu.shape:
            raise ValueError(f"W and mu must be equal-shape 2-D arrays, got {W.shape} and {mu.shape}")
        if W.shape[0] < 2:
            raise ValueError(f"need at least T=2 samples, got {W.shape[0]}")
        ts = np.arange(W.shape[0]) if self.timestamps is None else np.asarray(self.timestamps)
        if ts.shape != (W.shape[0],):
            raise ValueError("timestamps length must equal T")
        for arr in (W, mu, ts):
            arr.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "timestamps", ts)

    @property
    def T(self) -> int:
        return self.W.shape[0]

    @property
    def N(self) -> int:
        return self.W.shape[1]

    @property
    def errors(self) -> np.ndarray:
        """Forecast errors ``W - mu``."""
        return self.W - self.mu

    def subset(self, rows) -> ScenarioSet:
        rows = np.asarray(rows)
        return ScenarioSet(self.W[rows], self.mu[rows], self.timestamps[rows])

    def split(self, train_fraction: float, seed: int = 0) -> tuple[ScenarioSet, ScenarioSet]:
        """Random disjoint train/test partition; each side keeps chronological order."""
        if not 0.0 < train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
        n_train = int(round(train_fraction * self.T))
        if n_train == 0 or n_train == self.T:
            raise ValueError(f"degenerate partition: {n_train} of {self.T} rows in the training set")
        perm = np.random.default_rng(seed).permutation(self.T)
        train, test = np.sort(perm[:n_train]), np.sort(perm[n_train:])
        if len(train) < 2 or len(test) < 2:
            raise ValueError("degenerate partition: each side needs at least 2 rows")
        return self.subset(train), self.subset(test)


@dataclass(frozen=True)
class CorrelationSpec:
    eta: float
    seed: int = 0
    T: int = 8640

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError(f"uncertainty level eta must be >= 0, got {self.eta}")
        if self.T < 2:
            raise ValueError(f"need T >= 2 samples, got {self.T}")


def correlated_covariance(d0: np.ndarray, eta: float, rng: np.random.Generator) -> np.ndarray:
    """Target error covariance: std ``eta * |d0_n|`` with a random correlation structure.

    ``C = Chat Chat^T`` with ``Chat`` uniform on [0, 1]; off-diagonals are
    ``eta^2 c_nm / sqrt(c_nn c_mm) d0_n d0_m``.
    """
    d0 = np.asarray(d0, dtype=float)
    n = d0.size
    c_hat = rng.uniform(0.0, 1.0, size=(n, n))
    C = c_hat @ c_hat.T
    scale = np.sqrt(np.diag(C))
    corr = C / np.outer(scale, scale)
    np.fill_diagonal(corr, 1.0)
    return eta**2 * corr * np.outer(d0, d0)


def generate_correlated(net: Network, spec: CorrelationSpec) -> ScenarioSet:
    """Sample ``T`` nodal residual demands around the nominal forecast ``d0``.

    Buses with ``d0 = 0`` carry no error (their covariance rows vanish).
    """
    d0 = net.d0
    if not np.all(np.isfinite(d0)):
        raise ValueError("every bus needs a finite forecast d0")
    rng = np.random.default_rng(spec.seed)
    sigma = correlated_covariance(d0, spec.eta, rng)
    mu = np.tile(d0, (spec.T, 1))
    errors = np.zeros_like(mu)
    active = np.flatnonzero(d0 != 0.0)
    if spec.eta > 0 and active.size:
        chol = np.linalg.cholesky(sigma[np.ix_(active, active)])
        errors[:, active] = rng.standard_normal((spec.T, active.size)) @ chol.T
    return ScenarioSet(mu + errors, mu)


def _write_matrix(path: Path, timestamps, matrix: np.ndarray, bus_ids) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + [f"bus_{b}" for b in bus_ids])
        for ts, row in zip(timestamps, matrix):
            writer.writerow([ts] + [repr(float(v)) for v in row])


def _read_matrix(path: Path, bus_ids) -> tuple[np.ndarray, np.ndarray]:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    expected = ["timestamp"] + [f"bus_{b}" for b in bus_ids]
    if rows[0] != expected:
        raise ValueError(f"{path}: header {rows[0]} does not match network bus order {expected}")
    body = rows[1:]
    ts = np.array([r[0] for r in body])
    try:
        ts = ts.astype(int)
    except ValueError:
        pass
    data = np.array([[float(v) for v in r[1:]] for r in body], dtype=float)
    return ts, data.reshape(len(body), len(bus_ids))


def save_scenarios(scen: ScenarioSet, directory: str | Path, bus_ids) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_matrix(directory / OBSERVATIONS_CSV, scen.timestamps, scen.W, bus_ids)
    _write_matrix(directory / FORECASTS_CSV, scen.timestamps, scen.mu, bus_ids)


def load_scenarios(directory: str | Path, net: Network) -> ScenarioSet:
    """Read ``observations.csv`` (and ``forecasts.csv`` if present) from ``directory``.

    Without a forecast file the forecast is the network's nominal ``d0``.
    """
    directory = Path(directory)
    ts, W = _read_matrix(directory / OBSERVATIONS_CSV, net.bus_ids)
    fc = directory / FORECASTS_CSV
    if fc.exists():
        ts_mu, mu = _read_matrix(fc, net.bus_ids)
        if not np.array_equal(ts, ts_mu):
            raise ValueError("observation and forecast timestamps differ")
    else:
        mu = np.tile(net.d0, (W.shape[0], 1))
    return ScenarioSet(W, mu, ts)


def demand_box(scen: ScenarioSet) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise min/max of the observed residual demand."""
    return scen.W.min(axis=0), scen.W.max(axis=0)
