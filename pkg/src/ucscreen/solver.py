"""Backend-neutral LP/MILP model building and solving.

Screening, UC and membership models are written against
:class:`ModelBuilder`; :func:`solve` hands them to the configured backend.
Only HiGHS (through ``highspy``) is wired in.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .config import BINARY_TOL

INF = float("inf")


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    GAP_LIMIT = "GapLimit"
    TIME_LIMIT = "TimeLimit"
    NUMERIC_FAILURE = "NumericFailure"


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``big_m`` multiplies the largest line rating to give the big-M constant
    of the screening models.
    """

    mip_gap: float = 0.0
    time_limit: float | None = None
    threads: int = 1
    big_m: float = 100.0
    backend: str = "highs"
    warm_start: bool = True
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mip_gap < 0:
            raise ValueError(f"mip_gap must be >= 0, got {self.mip_gap}")
        if self.big_m < 10:
            raise ValueError(f"big_m multiplier must be >= 10, got {self.big_m}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown solver backend {self.backend!r}; available: {sorted(BACKENDS)}")
        if self.workers < 1 or self.threads < 1:
            raise ValueError("workers and threads must be >= 1")


@dataclass
class ModelBuilder:
    """A linear model: bounded variables, linear rows, linear minimization objective."""

    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    is_binary: list[bool] = field(default_factory=list)
    names: list[str] = field(default_factory=list)
    row_lo: list[float] = field(default_factory=list)
    row_hi: list[float] = field(default_factory=list)
    row_idx: list[np.ndarray] = field(default_factory=list)
    row_val: list[np.ndarray] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    hints: dict[int, float] = field(default_factory=dict)

    @property
    def num_vars(self) -> int:
        return len(self.lb)

    @property
    def num_rows(self) -> int:
        return len(self.row_lo)

    def add_var(self, lb: float = 0.0, ub: float = INF, binary: bool = False, name: str = "") -> int:
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ValueError(f"variable {name or self.num_vars}: lb {lb} > ub {ub}")
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.is_binary.append(binary)
        self.names.append(name)
        return self.num_vars - 1

    def add_vars(self, n: int, lb=0.0, ub=INF, binary: bool = False, name: str = "") -> np.ndarray:
        lb = np.broadcast_to(np.asarray(lb, dtype=float), (n,))
        ub = np.broadcast_to(np.asarray(ub, dtype=float), (n,))
        return np.array(
            [self.add_var(lb[i], ub[i], binary, f"{name}[{i}]" if name else "") for i in range(n)],
            dtype=np.int64,
        )

    def add_constraint(self, idx, coef, sense: str, rhs: float, name: str = "") -> int:
        """Add ``sum(coef * x[idx]) <sense> rhs`` with sense one of ``<=``, ``==``, ``>=``."""
        idx = np.asarray(idx, dtype=np.int64).ravel()
        coef = np.asarray(coef, dtype=float).ravel()
        if idx.shape != coef.shape:
            raise ValueError("index and coefficient arrays differ in length")
        if idx.size and (idx.min() < 0 or idx.max() >= self.num_vars):
            raise ValueError(f"constraint {name!r} references an undeclared variable")
        if sense == "<=":
            lo, hi = -INF, rhs
        elif sense == ">=":
            lo, hi = rhs, INF
        elif sense in ("==", "="):
            lo = hi = rhs
        else:
            raise ValueError(f"unknown sense {sense!r}")
        # merge repeated indices so backends see each column once per row
        uniq, inv = np.unique(idx, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inv, coef)
        nz = merged != 0.0
        self.row_idx.append(uniq[nz])
        self.row_val.append(merged[nz])
        self.row_lo.append(float(lo))
        self.row_hi.append(float(hi))
        self.row_names.append(name)
        return self.num_rows - 1

    def add_rows(self, idx, matrix: np.ndarray, sense: str, rhs, name: str = "") -> list[int]:
        """One row per line of ``matrix`` over the variables ``idx``."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (matrix.shape[0],))
        return [
            self.add_constraint(idx, matrix[r], sense, rhs[r], f"{name}[{r}]" if name else "")
            for r in range(matrix.shape[0])
        ]

    def set_objective(self, idx, coef) -> None:
        self.objective = {}
        for i, c in zip(np.asarray(idx).ravel(), np.asarray(coef, dtype=float).ravel()):
            self.objective[int(i)] = self.objective.get(int(i), 0.0) + float(c)

    def fix(self, var: int, value: float) -> None:
        self.lb[var] = self.ub[var] = float(value)

    def hint(self, idx, values) -> None:
        for i, v in zip(np.asarray(idx).ravel(), np.asarray(values, dtype=float).ravel()):
            self.hints[int(i)] = float(v)


@dataclass
class SolveOutcome:
    status: Status
    objective: float | None = None
    x: np.ndarray | None = None
    wall_time: float = 0.0
    mip_gap: float | None = None
    message: str = ""

    @property
    def has_solution(self) -> bool:
        return self.x is not None

    def value(self, idx) -> np.ndarray | float:
        if self.x is None:
            raise ValueError(f"no solution available (status {self.status.value})")
        return self.x[idx]

    def binary(self, idx) -> np.ndarray:
        """Binary values rounded to {0, 1} when within tolerance; NaN otherwise."""
        raw = np.atleast_1d(self.value(idx)).astype(float)
        out = np.round(raw)
        out[np.abs(raw - out) > BINARY_TOL] = np.nan
        return out


def _solve_highs(model: ModelBuilder, cfg: SolverConfig, relax: bool) -> SolveOutcome:
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", int(cfg.threads))
    h.setOptionValue("random_seed", int(cfg.seed))
    h.setOptionValue("mip_rel_gap", float(cfg.mip_gap))
    h.setOptionValue("mip_abs_gap", 1e-9 if cfg.mip_gap == 0 else 1e-6)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    if cfg.time_limit is not None:
        h.setOptionValue("time_limit", float(cfg.time_limit))

    n = model.num_vars
    inf = highspy.kHighsInf
    lb = np.clip(np.array(model.lb, dtype=float), -inf, inf)
    ub = np.clip(np.array(model.ub, dtype=float), -inf, inf)
    h.addVars(n, lb, ub)
    cols = np.arange(n, dtype=np.int32)
    cost = np.zeros(n)
    for i, c in model.objective.items():
        cost[i] = c
    if n:
        h.changeColsCost(n, cols, cost)
    binaries = np.flatnonzero(model.is_binary).astype(np.int32)
    is_mip = binaries.size > 0 and not relax
    if is_mip:
        h.changeColsIntegrality(
            binaries.size, binaries, np.array([highspy.HighsVarType.kInteger] * binaries.size)
        )
    if model.num_rows:
        starts = np.zeros(model.num_rows, dtype=np.int32)
        lengths = np.array([len(r) for r in model.row_idx], dtype=np.int32)
        starts[1:] = np.cumsum(lengths)[:-1]
        index = np.concatenate(model.row_idx).astype(np.int32) if lengths.sum() else np.zeros(0, np.int32)
        value = np.concatenate(model.row_val) if lengths.sum() else np.zeros(0)
        lo = np.clip(np.array(model.row_lo), -inf, inf)
        hi = np.clip(np.array(model.row_hi), -inf, inf)
        h.addRows(model.num_rows, lo, hi, int(lengths.sum()), starts, index, value)
    if is_mip and cfg.warm_start and model.hints:
        hint_idx = np.array(sorted(model.hints), dtype=np.int32)
        h.setSolution(hint_idx.size, hint_idx, np.array([model.hints[i] for i in hint_idx]))

    t0 = time.perf_counter()
    h.run()
    status = h.getModelStatus()
    if status == highspy.HighsModelStatus.kUnboundedOrInfeasible:
        h.setOptionValue("presolve", "off")
        h.run()
        status = h.getModelStatus()
    wall = time.perf_counter() - t0

    info = h.getInfo()
    S = highspy.HighsModelStatus
    gap = float(info.mip_gap) if is_mip else 0.0
    has_primal = info.primal_solution_status == 2  # kSolutionStatusFeasible
    if status == S.kOptimal:
        st = Status.GAP_LIMIT if is_mip and cfg.mip_gap > 0 and gap > 1e-9 else Status.OPTIMAL
    elif status == S.kInfeasible:
        st = Status.INFEASIBLE
    elif status in (S.kUnbounded, S.kUnboundedOrInfeasible):
        st = Status.UNBOUNDED
    elif status == S.kTimeLimit:
        st = Status.TIME_LIMIT
    else:
        return SolveOutcome(Status.NUMERIC_FAILURE, wall_time=wall, message=h.modelStatusToString(status))

    x = None
    obj = None
    if st in (Status.OPTIMAL, Status.GAP_LIMIT) or (st is Status.TIME_LIMIT and has_primal):
        x = np.array(h.getSolution().col_value, dtype=float)
        obj = float(info.objective_function_value)
    return SolveOutcome(st, obj, x, wall, gap if is_mip else None, h.modelStatusToString(status))


BACKENDS = {"highs": _solve_highs}


def solve(model: ModelBuilder, cfg: SolverConfig | None = None) -> SolveOutcome:
    """Solve ``model`` (MILP if it has binaries) with the configured backend."""
    cfg = cfg or SolverConfig()
    return BACKENDS[cfg.backend](model, cfg, relax=False)


def solve_lp_relaxation(model: ModelBuilder, cfg: SolverConfig | None = None) -> SolveOutcome:
    """Solve with every binary relaxed to the interval [0, 1]."""
    cfg = cfg or SolverConfig()
    return BACKENDS[cfg.backend](model, cfg, relax=True)
