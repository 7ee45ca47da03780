"""k-graph storage, neighborhood queries, and typicality checks.

A binomial 3-graph is close to (eps,t,d)-typical once the joint-neighborhood
targets d^s * n sit well above their sampling noise; this walk-through shows
the queries and how the deviation report reads.
"""

import random
from itertools import combinations

from hypack import KGraph, is_typical, max_m_degree, shadow_power
from hypack.workbench import gen_binomial_kgraph

rng = random.Random(7)

# --- a tiny complete 3-graph -------------------------------------------------
k4 = KGraph(3, 4, combinations(range(4), 3))
print("K_4^(3) edges:", sorted(k4.edges))
print("N({0,1}) =", k4.neighborhood({0, 1}))
print("max 2-degree:", max_m_degree(k4, 2))

# --- joint neighborhoods -----------------------------------------------------
k6 = KGraph(3, 6, combinations(range(6), 3))
print("\nK_6^(3): joint neighborhood of {{0,1},{2,3}} =",
      k6.joint_neighborhood([(0, 1), (2, 3)]))

# --- typicality of a binomial host -------------------------------------------
host = gen_binomial_kgraph(80, 3, 0.7, rng, certify=False)
rep = is_typical(host, eps=0.5, t=2, d=0.7, rng=rng, exhaustive_cap=0, samples=400)
print(f"\nbinomial n=80 d=0.7: typical={rep.ok} "
      f"(worst deviation {rep.worst_deviation:.3f}, sampled={rep.sampled})")

# an isolated vertex breaks typicality and the report names a witness
broken = KGraph(3, 40, [e for e in combinations(range(40), 3) if 0 not in e])
rep2 = is_typical(broken, eps=0.3, t=1, d=0.9)
print(f"host with an isolated vertex: typical={rep2.ok}, witness={rep2.worst_family}")

# --- shadow powers -----------------------------------------------------------
path = KGraph(3, 5, [(0, 1, 2), (2, 3, 4)])
sq = shadow_power(path, 2)
print("\npath-like 3-graph: H_*^2 connects 0 and 4:", sq.has_edge(0, 4))
