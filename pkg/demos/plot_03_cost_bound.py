"""
Cost-bounded screening
======================

Fit a linear cost-versus-load bound from historical dispatch, add it to
the screening region, and sweep the safety factor on the slope.
"""

from __future__ import annotations

import logging

from ucscreen import Method, build_problem, fit, screen
from ucscreen.cases import demo_network
from ucscreen.scenarios import CorrelationSpec, generate_correlated
from ucscreen.uc import solve_instances

logging.basicConfig(level=logging.WARNING)

net = demo_network()
train, _ = generate_correlated(net, CorrelationSpec(eta=0.1, seed=1, T=1000)).split(0.5, seed=1)

# historical costs: full UC on a subsample of training demands
rows = train.W[:200]
costs = [s.cost for s in solve_instances(net, rows)]
bound = fit(costs, rows.sum(axis=1))
seg = bound.segments[0]
print(f"cost ~ {seg.a0:.1f} + {seg.b0:.3f} D, residual sigma {bound.sigma:.1f}")

d1 = screen(build_problem(net, train, Method.D1_UCD, K=2))
print(f"without bound: {d1.n_retained} directions")
for gamma in (0.0, 0.1, 0.25, 0.5, 1.0):
    ed = screen(build_problem(net, train, Method.ED_D1_UCD, K=2, bound=bound.with_factors(gamma=gamma)))
    # larger gamma loosens the bound, so the kept set can only grow toward the bound-free one
    print(f"gamma={gamma:<4} kept {ed.n_retained}  fallback={ed.fallback}")
