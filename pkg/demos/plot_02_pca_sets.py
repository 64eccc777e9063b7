"""
Data-driven demand sets
=======================

Fit principal components to forecast errors and build the two
polyhedral sets spanned by their extreme projections.
"""

from __future__ import annotations

import numpy as np

from ucscreen import SetKind, build_set, contains, fit_pca
from ucscreen.cases import demo_network
from ucscreen.scenarios import CorrelationSpec, generate_correlated
from ucscreen.uncertainty import sample_p2

net = demo_network()
train, _ = generate_correlated(net, CorrelationSpec(eta=0.1, seed=1, T=1000)).split(0.5, seed=1)

model = fit_pca(train)
print("eigenvalues (MW^2):", np.round(model.eigvals, 2))
print("cumulative explained:", np.round(model.explained_fraction(), 3))

rng = np.random.default_rng(0)
for K in range(1, net.N + 1):
    p1 = build_set(model, net.d0, K, SetKind.P1)
    p2 = build_set(model, net.d0, K, SetKind.P2)
    inside = np.mean([contains(p1, x) for x in sample_p2(p2, 200, rng)])
    lo, hi = p1.bounding_box()
    print(f"K={K}: P2 samples inside P1 {inside:.0%}, P1 box width {np.round(hi - lo, 1)}")
