"""The weight-controlled matching engine on a regular linear design.

Random greedy, restarted until every tuple weight lands inside the
pseudorandom window w(E)/Delta^ell.
"""

import random
import statistics

from hypack import MatchHypergraph, TupleWeight, brute_force_matchings, degree_stats, pseudorandom_matching

# exactly 12-regular linear 3-graph (banded Latin design)
m, s = 60, 12
edges = [(i, m + (i + t) % m, 2 * m + (2 * i + t) % m) for i in range(m) for t in range(s)]
h = MatchHypergraph(edges)
delta, delta2, e = degree_stats(h)
print(f"design: v={3*m}, e={e}, Delta={delta}, Delta_2={delta2}")

count = TupleWeight.counting(h.edges)
ratios = []
for seed in range(20):
    res = pseudorandom_matching(h, [count], tol=0.25, rng=random.Random(seed), restarts=1, slack=0.0)
    got, target = res.ratios["count"]
    ratios.append(got / target)
print(f"counting-weight ratio over 20 seeds: mean {statistics.mean(ratios):.3f}, "
      f"spread [{min(ratios):.3f}, {max(ratios):.3f}] (target 1 +- 0.25)")

# pair weights stay controlled too
rng = random.Random(3)
pairs = {}
es = list(h.edges)
while len(pairs) < 40:
    a, b = rng.sample(range(len(es)), 2)
    if not (es[a] & es[b]):
        pairs[frozenset({es[a], es[b]})] = 1.0
w2 = TupleWeight(2, pairs, name="pairs")
res = pseudorandom_matching(h, [count, w2], tol=0.6, rng=rng, restarts=10)
print("pair weight:", res.ratios["pairs"])

# small instances can be enumerated outright
tiny = MatchHypergraph([(0, 1, 2), (2, 3, 4), (4, 5, 0), (6, 7, 8)])
print("\nall maximal matchings of a tiny instance:")
for mm in brute_force_matchings(tiny):
    print("  ", [tuple(sorted(x)) for x in mm])
