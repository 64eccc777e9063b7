"""
Reduced unit commitment
=======================

Solve unit commitment with only the kept line limits and check that the
cost and the full-network feasibility match the complete model.
"""

from __future__ import annotations

import numpy as np

from ucscreen import Method, build_problem, evaluate
from ucscreen.cases import demo_network
from ucscreen.scenarios import CorrelationSpec, generate_correlated

net = demo_network()
train, test = generate_correlated(net, CorrelationSpec(eta=0.1, seed=1, T=1000)).split(0.5, seed=1)
test = test.subset(np.arange(50))

for method in (Method.B_UCD, Method.D1_UCD, Method.D2_UCD):
    report, _ = evaluate(build_problem(net, train, method, K=2), test)
    worst = np.nanmax(np.abs(report.cost_delta))
    print(f"{method.value:7s} kept {report.retained_pct:5.1f}%  infeasible {report.n_infeasible}  "
          f"max |cost delta| {worst:.2e}")
