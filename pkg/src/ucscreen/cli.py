"""Command-line front end: data generation, set and bound fitting, screening, UC and the full pipeline."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import costbound
from .cases import demo_config_text, demo_network
from .grid import Network, load_network
from .oracle import exact_redundancy
from .scenarios import CorrelationSpec, ScenarioSet, generate_correlated, load_scenarios, save_scenarios
from .screening import Direction, Method, ScreeningProblem, ScreeningResult, iteration_table, partition_lines, screen
from .solver import SolverConfig
from .uc import UcInstance, build_problem, evaluate, solve_instances, solve_uc, verify_full_feasibility
from .uncertainty import SetKind, UncertaintySet, build_set, fit_pca

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger("ucscreen")

DEMO = "demo"

# dotted key -> default; the default's type is the accepted type (ints are accepted for floats)
DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "workers": 1,
    "paths.network": "",
    "paths.scenarios": "",
    "paths.out": "out",
    "data.eta": 0.035,
    "data.samples": 8640,
    "data.train_fraction": 0.5,
    "uncertainty.kind": "",
    "uncertainty.k": 0,
    "bound.mode": "literal",
    "bound.delta": 0.0,
    "bound.gamma": 0.0,
    "bound.breakpoints": [],
    "bound.fit_samples": 0,
    "bound.gamma_sweep": [],
    "screen.method": "b-ucd",
    "screen.blocks": 0,
    "eval.test_instances": 0,
    "solver.backend": "highs",
    "solver.mip_gap": 0.0,
    "solver.time_limit": 0.0,
    "solver.threads": 1,
    "solver.big_m": 100.0,
    "solver.warm_start": True,
}


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


def _flatten(tree: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _check_type(key: str, value: Any) -> Any:
    default = DEFAULTS[key]
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, list):
        ok = isinstance(value, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        value = [float(v) for v in value] if ok else value
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(f"config key {key!r}: expected {type(default).__name__}, got {value!r}")
    return value


def parse_config(text: str) -> dict[str, Any]:
    """Flatten a TOML document to dotted keys over the defaults; unknown keys are errors."""
    try:
        flat = _flatten(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    values = dict(DEFAULTS)
    for key, value in flat.items():
        values[key] = _check_type(key, value)
    return values


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    @classmethod
    def from_text(cls, text: str, **overrides) -> RunConfig:
        values = parse_config(text)
        for key, value in overrides.items():
            if value is not None:
                values[key] = _check_type(key, value)
        cfg = cls(values)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path | None, **overrides) -> RunConfig:
        text = demo_config_text() if path is None else Path(path).read_text()
        return cls.from_text(text, **overrides)

    def validate(self) -> None:
        try:
            method = Method(self["screen.method"])
        except ValueError as exc:
            raise ConfigError(f"screen.method: {exc}") from exc
        kind = self["uncertainty.kind"]
        if kind and SetKind(kind) is not method.set_kind:
            raise ConfigError(f"uncertainty.kind={kind} does not match screen.method={method.value}")
        if self["bound.mode"] not in costbound.MODES:
            raise ConfigError(f"bound.mode must be one of {costbound.MODES}")
        if self["bound.delta"] < 0 or self["bound.gamma"] < 0 or any(g < 0 for g in self["bound.gamma_sweep"]):
            raise ConfigError("bound.delta, bound.gamma and bound.gamma_sweep must be >= 0")
        if not 0 < self["data.train_fraction"] < 1:
            raise ConfigError("data.train_fraction must lie in (0, 1)")
        for key in ("uncertainty.k", "screen.blocks", "eval.test_instances", "bound.fit_samples"):
            if self[key] < 0:
                raise ConfigError(f"{key} must be >= 0")
        try:
            self.solver()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def method(self) -> Method:
        return Method(self["screen.method"])

    def solver(self) -> SolverConfig:
        return SolverConfig(
            mip_gap=self["solver.mip_gap"],
            time_limit=self["solver.time_limit"] or None,
            threads=self["solver.threads"],
            big_m=self["solver.big_m"],
            backend=self["solver.backend"],
            warm_start=self["solver.warm_start"],
            workers=self["workers"],
            seed=self["seed"],
        )


def read_network(path: str | None) -> Network:
    """``demo`` (or an empty path) selects the bundled five-bus system."""
    if not path or (path == DEMO and not Path(path).exists()):
        return demo_network().with_ptdf()
    return load_network(path).with_ptdf()


@contextmanager
def _stage(name: str):
    logger.info("stage: %s", name)
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


def _k_or_all(k: int, N: int) -> int:
    return N if k == 0 else k


def _fit_bound(net: Network, train: ScenarioSet, cfg: RunConfig, out: Path, solver: SolverConfig):
    rows = train.W
    n = cfg["bound.fit_samples"]
    if n and n < len(rows):
        rows = rows[np.linspace(0, len(rows) - 1, n).round().astype(int)]
    sols = solve_instances(net, rows, solver)
    ok = [i for i, s in enumerate(sols) if s.feasible]
    if len(ok) < len(sols):
        logger.warning("%d of %d cost-log instances infeasible; left out of the fit", len(sols) - len(ok), len(sols))
    loads = rows[ok].sum(axis=1)
    costs = np.array([sols[i].cost for i in ok])
    costbound.write_uc_log(out / "fig2_cost_vs_load.csv", loads, costs)
    return costbound.fit(costs, loads, cfg["bound.breakpoints"], cfg["bound.delta"], cfg["bound.gamma"], cfg["bound.mode"])


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def run_pipeline(cfg: RunConfig, out: str | Path | None = None) -> int:
    """Data, uncertainty set, cost bound, screening, evaluation and figure data, written under ``paths.out``.

    Artifacts from completed stages stay on disk when a later stage fails.
    """
    out = Path(out or cfg["paths.out"])
    out.mkdir(parents=True, exist_ok=True)
    solver = cfg.solver()
    seed = cfg["seed"]
    method = cfg.method

    with _stage("load"):
        net = read_network(cfg["paths.network"])
    with _stage("data"):
        if cfg["paths.scenarios"]:
            scen = load_scenarios(cfg["paths.scenarios"], net)
        else:
            scen = generate_correlated(net, CorrelationSpec(cfg["data.eta"], seed, cfg["data.samples"]))
            save_scenarios(scen, out / "scenarios", net.bus_ids)
        train, test = scen.split(cfg["data.train_fraction"], seed)
        if cfg["eval.test_instances"]:
            test = test.subset(np.arange(min(cfg["eval.test_instances"], test.T)))
    K = _k_or_all(cfg["uncertainty.k"], net.N)
    with _stage("cost-bound"):
        bound = _fit_bound(net, train, cfg, out, solver)
        bound.save(out / "bound.json")
    with _stage("uncertainty"):
        partition = partition_lines(net.L, n_blocks=min(cfg["screen.blocks"], net.L)) if cfg["screen.blocks"] else None
        problem = build_problem(net, train, method, K, bound, partition)
        problem.uset.save(out / "set.json")
    with _stage("screen"):
        result = screen(problem, solver)
        result.save(out / "result.json")
    with _stage("evaluate"):
        report, _ = evaluate(problem, test, solver, result)
        report.save(out / "report.json")
    with _stage("figures"):
        traces = {}
        rows = []
        model = fit_pca(train)
        for k in range(1, net.N + 1):
            counts = []
            for m in (Method.D1_UCD, Method.D2_UCD):
                r = screen(build_problem(net, train, m, k), solver)
                counts.append(r.n_retained)
                if k == K:
                    traces[m.value] = r
            rows.append([k, repr(float(model.explained_fraction()[k - 1])), *counts])
        _write_csv(out / "fig3_retained_vs_k.csv", ["k", "explained_fraction", "d1_ucd", "d2_ucd"], rows)
        traces = {Method.B_UCD.value: screen(build_problem(net, train, Method.B_UCD), solver), **traces}
        (out / "iterations.txt").write_text(iteration_table(traces) + "\n")
        rows = []
        for gamma in cfg["bound.gamma_sweep"]:
            p = build_problem(net, train, Method.ED_D1_UCD, K, bound.with_factors(gamma=gamma))
            r = screen(p, solver)
            rows.append([repr(gamma), r.n_retained, repr(r.retained_pct), str(r.fallback).lower()])
        _write_csv(out / "fig4_retained_vs_gamma.csv", ["gamma", "n_retained", "retained_pct", "fallback"], rows)
    logger.info("%s: retained %d of %d directions; artifacts in %s", method.value, result.n_retained, 2 * net.L, out)
    return 0


# ---------------------------------------------------------------------------
# subcommands


def _solver_from_args(args) -> SolverConfig:
    cfg = RunConfig.load(args.config, seed=args.seed, workers=args.workers)
    return cfg.solver()


def cmd_gen_data(args) -> int:
    net = read_network(args.network)
    seed = args.seed if args.seed is not None else 0
    scen = generate_correlated(net, CorrelationSpec(args.eta, seed, args.samples))
    save_scenarios(scen, args.out, net.bus_ids)
    return 0


def cmd_uncertainty(args) -> int:
    net = read_network(args.network)
    scen = load_scenarios(args.scenarios, net)
    seed = args.seed if args.seed is not None else 0
    train, _ = scen.split(args.train_fraction, seed)
    kind = SetKind(args.kind)
    if kind is SetKind.BOX:
        box = (net.d_min, net.d_max) if net.has_demand_bounds else (train.W.min(axis=0), train.W.max(axis=0))
        uset = build_set(None, net.d0, kind=kind, box=box)
    else:
        uset = build_set(fit_pca(train), net.d0, _k_or_all(args.k, net.N), kind)
    uset.save(args.out)
    return 0


def cmd_cost_bound_fit(args) -> int:
    loads, costs = costbound.read_uc_log(args.uc_log)
    bps = [float(b) for b in args.breakpoints.split(",")] if args.breakpoints else []
    cb = costbound.fit(costs, loads, bps, args.delta, args.gamma, args.mode)
    cb.save(args.out)
    print(f"coverage on the log: {costbound.coverage(cb, costs, loads):.4f}")
    return 0


def cmd_cost_bound_log(args) -> int:
    net = read_network(args.network)
    scen = load_scenarios(args.scenarios, net)
    rows = scen.W[: args.samples] if args.samples else scen.W
    sols = solve_instances(net, rows, _solver_from_args(args))
    ok = [i for i, s in enumerate(sols) if s.feasible]
    costbound.write_uc_log(args.out, rows[ok].sum(axis=1), [sols[i].cost for i in ok])
    return 0


def cmd_screen(args) -> int:
    net = read_network(args.network)
    uset = UncertaintySet.load(args.set)
    method = Method(args.method)
    bound = costbound.CostBound.load(args.bound) if args.bound else None
    partition = partition_lines(net.L, n_blocks=args.blocks) if args.blocks else None
    result = screen(ScreeningProblem(net, uset, method, bound, partition), _solver_from_args(args))
    result.save(args.out)
    print(iteration_table({method.value: result}))
    return 0


def _demand_row(net: Network, ref: str) -> np.ndarray:
    path, _, row = ref.rpartition(":")
    if not path:
        raise ValueError(f"--demand expects <csv>:<row>, got {ref!r}")
    scen = load_scenarios(Path(path).parent, net) if Path(path).name == "observations.csv" else None
    if scen is None:
        raise ValueError("--demand must point at an observations.csv file")
    return scen.W[int(row)]


def cmd_uc_solve(args) -> int:
    net = read_network(args.network)
    demand = _demand_row(net, args.demand)
    retained = None
    if args.retained:
        retained = ScreeningResult.load(args.retained, net.line_ids).umbrella
    sol = solve_uc(UcInstance(net, demand, retained), _solver_from_args(args))
    record = {
        "status": sol.status.value,
        "cost": sol.cost,
        "u": [int(v) if np.isfinite(v) else None for v in sol.u],
        "g": [float(v) for v in sol.g],
        "violations": [v.__dict__ for v in verify_full_feasibility(sol, net)] if sol.feasible else [],
    }
    text = json.dumps(record, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if sol.feasible else 1


def cmd_evaluate(args) -> int:
    net = read_network(args.network)
    scen = load_scenarios(args.scenarios, net)
    seed = args.seed if args.seed is not None else 0
    train, test = scen.split(args.train_fraction, seed)
    if args.test_instances:
        test = test.subset(np.arange(min(args.test_instances, test.T)))
    bound = costbound.CostBound.load(args.bound) if args.bound else None
    problem = build_problem(net, train, args.method, _k_or_all(args.k, net.N), bound)
    report, _ = evaluate(problem, test, _solver_from_args(args))
    report.save(args.out)
    return 0


def cmd_pipeline(args) -> int:
    cfg = RunConfig.load(args.config, seed=args.seed, workers=args.workers)
    return run_pipeline(cfg, args.out)


def cmd_oracle_redundancy(args) -> int:
    net = read_network(args.network)
    if args.set:
        uset = UncertaintySet.load(args.set)
    elif net.has_demand_bounds:
        uset = build_set(None, net.d0, kind=SetKind.BOX, box=(net.d_min, net.d_max))
    else:
        raise ValueError("network has no demand bounds; pass --set")
    matches = [i for i, lid in enumerate(net.line_ids) if str(lid) == args.line]
    if not matches:
        raise ValueError(f"no line with id {args.line!r}")
    line = matches[0]
    dr = Direction(line, 1 if args.dir == "+" else -1)
    print(exact_redundancy(net, uset, (dr.line, dr.sign)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML run configuration (default: bundled demo)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    common.add_argument("--log-level", default=argparse.SUPPRESS, choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="ucscreen", parents=[common], description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="synthetic correlated residual demand")
    p.add_argument("--network", required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--samples", type=int, default=8640)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("uncertainty", parents=[common], help="fit a box, P1 or P2 demand set")
    p.add_argument("--network", required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--kind", choices=[k.value for k in SetKind], required=True)
    p.add_argument("--k", type=int, default=0, help="principal components (0: all)")
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_uncertainty)

    p = sub.add_parser("cost-bound", parents=[common], help="cost-bound tools")
    cb_sub = p.add_subparsers(dest="action", required=True)
    q = cb_sub.add_parser("fit", parents=[common])
    q.add_argument("--uc-log", required=True)
    q.add_argument("--breakpoints", default="")
    q.add_argument("--delta", type=float, default=0.0)
    q.add_argument("--gamma", type=float, default=0.0)
    q.add_argument("--mode", choices=costbound.MODES, default="literal")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_cost_bound_fit)
    q = cb_sub.add_parser("log", parents=[common], help="solve full UC per scenario and write the cost log")
    q.add_argument("--network", required=True)
    q.add_argument("--scenarios", required=True)
    q.add_argument("--samples", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_cost_bound_log)

    p = sub.add_parser("screen", parents=[common], help="label line directions Umbrella or Removable")
    p.add_argument("--network", required=True)
    p.add_argument("--set", required=True)
    p.add_argument("--method", choices=[m.value for m in Method], required=True)
    p.add_argument("--bound")
    p.add_argument("--blocks", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("uc", parents=[common], help="unit commitment")
    uc_sub = p.add_subparsers(dest="action", required=True)
    q = uc_sub.add_parser("solve", parents=[common])
    q.add_argument("--network", required=True)
    q.add_argument("--demand", required=True, help="<dir>/observations.csv:<row>")
    q.add_argument("--retained", help="result.json; only its Umbrella directions are enforced")
    q.add_argument("--out")
    q.set_defaults(func=cmd_uc_solve)

    p = sub.add_parser("evaluate", parents=[common], help="reduced vs full UC on held-out scenarios")
    p.add_argument("--network", required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--method", choices=[m.value for m in Method], required=True)
    p.add_argument("--bound")
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--test-instances", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", parents=[common], help="run every stage from a config file")
    p.add_argument("--out", help="output directory (overrides paths.out)")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("oracle", parents=[common], help="exact reference checks")
    or_sub = p.add_subparsers(dest="action", required=True)
    q = or_sub.add_parser("redundancy", parents=[common])
    q.add_argument("--network", required=True)
    q.add_argument("--line", required=True)
    q.add_argument("--dir", choices=["+", "-"], required=True)
    q.add_argument("--set")
    q.set_defaults(func=cmd_oracle_redundancy)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("config", None), ("seed", None), ("workers", None), ("log_level", "WARNING")):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
