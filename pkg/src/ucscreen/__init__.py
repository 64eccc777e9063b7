"""Umbrella-constraint screening of line limits for single-period unit commitment."""

from __future__ import annotations

from .costbound import CostBound, CostSegment, coverage, fit
from .grid import Bus, Generator, Line, Network, NetworkError, NumericFailure, compute_ptdf, line_flow, load_network
from .scenarios import CorrelationSpec, ScenarioSet, generate_correlated, load_scenarios, save_scenarios
from .screening import (
    Direction,
    Method,
    ScreeningError,
    ScreeningProblem,
    ScreeningResult,
    discover_umbrella,
    partition_lines,
    screen,
    screen_benchmark,
    screen_decomposed,
)
from .solver import SolverConfig, Status
from .uc import EvalReport, UcInstance, UcSolution, build_problem, evaluate, solve_uc, verify_full_feasibility
from .uncertainty import SetKind, UncertaintySet, build_set, contains, fit_pca

__version__ = "0.1.0"

__all__ = [
    "Bus", "CorrelationSpec", "CostBound", "CostSegment", "Direction", "EvalReport", "Generator", "Line",
    "Method", "Network", "NetworkError", "NumericFailure", "ScenarioSet", "ScreeningError",
    "ScreeningProblem", "ScreeningResult", "SetKind", "SolverConfig", "Status", "UcInstance", "UcSolution",
    "UncertaintySet", "build_problem", "build_set", "compute_ptdf", "contains", "coverage",
    "discover_umbrella", "evaluate", "fit", "fit_pca", "generate_correlated", "line_flow", "load_network",
    "load_scenarios", "partition_lines", "save_scenarios", "screen", "screen_benchmark",
    "screen_decomposed", "solve_uc", "verify_full_feasibility",
]
