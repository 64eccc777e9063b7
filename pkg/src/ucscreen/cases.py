"""Small reproducible networks: random connected cases and the bundled 5-bus demo."""

from __future__ import annotations

import json
from importlib import resources

import numpy as np
from scipy.optimize import linprog

from .grid import Bus, Generator, Line, Network, network_from_dict


def demo_network() -> Network:
    """The bundled five-bus demo system (no demand bounds; they come from data)."""
    text = resources.files("ucscreen").joinpath("data/demo5.json").read_text()
    return network_from_dict(json.loads(text))


def demo_config_text() -> str:
    return resources.files("ucscreen").joinpath("data/demo5.toml").read_text()


def _flow_range(net: Network) -> np.ndarray:
    """Largest |flow| per line over generator and demand bounds, ignoring line limits."""
    H = net.require_ptdf()
    G = net.gen_bus
    M, N = net.M, net.N
    F = np.hstack([H @ G, -H])  # flow = H (G g - d)
    bounds = [(0.0, gm) for gm in net.g_max] + list(zip(net.d_min, net.d_max))
    A_eq = np.concatenate([np.ones(M), -np.ones(N)])[None, :]
    out = np.zeros(net.L)
    for l in range(net.L):
        hi = linprog(-F[l], A_eq=A_eq, b_eq=[0.0], bounds=bounds, method="highs")
        lo = linprog(F[l], A_eq=A_eq, b_eq=[0.0], bounds=bounds, method="highs")
        out[l] = max(-hi.fun, -lo.fun, abs(lo.fun))
    return out


def _limits_feasible(net: Network) -> bool:
    H = net.require_ptdf()
    G = net.gen_bus
    F = np.hstack([H @ G, -H])
    bounds = [(0.0, gm) for gm in net.g_max] + list(zip(net.d_min, net.d_max))
    A_eq = np.concatenate([np.ones(net.M), -np.ones(net.N)])[None, :]
    res = linprog(
        np.zeros(F.shape[1]),
        A_ub=np.vstack([F, -F]),
        b_ub=np.concatenate([net.f_max, net.f_max]),
        A_eq=A_eq,
        b_eq=[0.0],
        bounds=bounds,
        method="highs",
    )
    return res.status == 0


def random_network(
    rng: np.random.Generator,
    n_bus: int,
    n_line: int,
    n_gen: int,
    duplicate: bool = False,
    rating_range: tuple[float, float] = (0.45, 1.15),
    max_tries: int = 50,
) -> Network:
    """Random connected network with demand bounds and a mix of binding and slack lines.

    Line ratings are drawn as a fraction of each line's largest attainable
    flow. With ``duplicate=True`` the last line is an exact parallel copy of
    another line (same susceptance and rating), producing identical PTDF rows.
    """
    n_distinct = n_line - int(duplicate)
    if n_distinct < n_bus - 1:
        raise ValueError("too few lines for a connected network")
    if n_distinct > n_bus * (n_bus - 1) // 2:
        raise ValueError("too many lines for a simple graph")
    for _ in range(max_tries):
        edges = [(int(rng.integers(0, i)), i) for i in range(1, n_bus)]
        candidates = [(i, j) for i in range(n_bus) for j in range(i + 1, n_bus) if (i, j) not in edges]
        extra = rng.choice(len(candidates), size=n_distinct - len(edges), replace=False)
        edges += [candidates[k] for k in sorted(extra)]
        sus = rng.uniform(5.0, 20.0, size=len(edges))
        if duplicate:
            k = int(rng.integers(0, len(edges)))
            edges.append(edges[k])
            sus = np.append(sus, sus[k])

        d0 = rng.uniform(20.0, 80.0, size=n_bus)
        spread = rng.uniform(0.1, 0.4, size=n_bus) * d0
        buses = tuple(
            Bus(i + 1, float(d0[i]), float(d0[i] - spread[i]), float(d0[i] + spread[i])) for i in range(n_bus)
        )
        gen_bus = rng.choice(n_bus, size=n_gen, replace=n_gen > n_bus)
        share = rng.dirichlet(2.0 * np.ones(n_gen))
        g_max = share * 1.3 * sum(b.d_max for b in buses)
        gens = tuple(
            Generator(
                m + 1,
                int(gen_bus[m]) + 1,
                float(rng.uniform(0.0, 0.2) * g_max[m]),
                float(g_max[m]),
                float(rng.uniform(5.0, 50.0)),
            )
            for m in range(n_gen)
        )
        lines = tuple(
            Line(l + 1, i + 1, j + 1, float(sus[l]), 1e6) for l, (i, j) in enumerate(edges)
        )
        net = Network(buses, gens, lines, 1).with_ptdf()
        reach = _flow_range(net)
        if np.any(reach < 1e-3):
            continue
        ratings = rng.uniform(*rating_range, size=len(lines)) * reach
        if duplicate:
            ratings[-1] = ratings[k]
        lines = tuple(Line(ln.id, ln.from_bus, ln.to_bus, ln.susceptance, float(r)) for ln, r in zip(lines, ratings))
        net = Network(buses, gens, lines, 1).with_ptdf()
        if _limits_feasible(net):
            return net
    raise RuntimeError("could not draw a feasible random network")


def random_corpus(seed: int, count: int, duplicate_every: int = 4) -> list[Network]:
    """``count`` random networks with N in 3..6, L <= 8, M <= 4."""
    rng = np.random.default_rng(seed)
    nets = []
    for i in range(count):
        n_bus = int(rng.integers(3, 7))
        dup = duplicate_every > 0 and i % duplicate_every == duplicate_every - 1
        max_simple = min(8 - int(dup), n_bus * (n_bus - 1) // 2)
        n_line = int(rng.integers(n_bus - 1, max_simple + 1)) + int(dup)
        n_gen = int(rng.integers(1, 5))
        nets.append(random_network(rng, n_bus, n_line, n_gen, duplicate=dup))
    return nets
