"""
Cross-checking against exact redundancy
=======================================

On small random networks, compare the discovered umbrella with an
independent linear-programming redundancy test of every direction.
"""

from __future__ import annotations

from ucscreen import Method, ScreeningProblem, SetKind, build_set, discover_umbrella
from ucscreen.cases import random_corpus
from ucscreen.oracle import classify

agree = 0
nets = random_corpus(7, 10)
for i, net in enumerate(nets):
    uset = build_set(None, net.d0, kind=SetKind.BOX, box=(net.d_min, net.d_max))
    found = {tuple(d) for d in discover_umbrella(ScreeningProblem(net, uset, Method.B_UCD)).umbrella}
    exact = classify(net, uset).irredundant_representatives()
    agree += found == exact
    print(f"network {i}: N={net.N} L={net.L} kept {len(found)} exact {len(exact)}")
print(f"{agree}/{len(nets)} agree")
