from __future__ import annotations

import numpy as np
import pytest

from ucscreen.cases import demo_network, random_corpus
from ucscreen.grid import Bus, Generator, Line, Network


def make_network(buses, gens, lines, slack=1) -> Network:
    """Build from compact tuples: buses (id, d0[, lo, hi]), gens (id, bus, gmin, gmax, cost), lines (id, from, to, b, fmax)."""
    return Network(
        tuple(Bus(*b) for b in buses),
        tuple(Generator(*g) for g in gens),
        tuple(Line(*ln) for ln in lines),
        slack,
    ).with_ptdf()


@pytest.fixture
def triangle() -> Network:
    return make_network(
        [(1, 0.0, 0.0, 0.0), (2, 60.0, 40.0, 80.0), (3, 40.0, 20.0, 60.0)],
        [(1, 1, 0.0, 200.0, 10.0), (2, 3, 0.0, 100.0, 30.0)],
        [(1, 1, 2, 10.0, 50.0), (2, 1, 3, 10.0, 1000.0), (3, 2, 3, 10.0, 1000.0)],
    )


@pytest.fixture
def two_bus():
    def build(f_max: float, g_max: float = 200.0, load: float = 100.0) -> Network:
        return make_network(
            [(1, 0.0, 0.0, 0.0), (2, load, 0.5 * load, load)],
            [(1, 1, 0.0, g_max, 10.0), (2, 2, 0.0, g_max, 50.0)],
            [(1, 1, 2, 10.0, f_max)],
        )

    return build


@pytest.fixture(scope="session")
def corpus() -> list[Network]:
    return random_corpus(seed=2024, count=20)


@pytest.fixture(scope="session")
def demo() -> Network:
    return demo_network().with_ptdf()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
