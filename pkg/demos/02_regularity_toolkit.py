"""Bipartite regularity toolkit: 4-cycle certification, m-factors, matchings.

The 4-cycle count certifies regularity without quantifying over subset pairs:
density (1 +- eps) d plus C4 < (1+eps) d^4 |A|^2 |B|^2 / 4 suffices.
"""

import math
import random

import numpy as np

from hypack import Bigraph, c4_count, certify_regular_c4, is_super_regular, m_factor, perfect_matching


def regular_union(n, m, rng):
    adj = np.zeros((n, n), dtype=bool)
    for _ in range(m):
        perm = list(range(n))
        rng.shuffle(perm)
        for _ in range(50 * n):
            bad = [a for a in range(n) if adj[a, perm[a]]]
            if not bad:
                break
            a, b = rng.choice(bad), rng.randrange(n)
            if b != a and not adj[a, perm[b]] and not adj[b, perm[a]]:
                perm[a], perm[b] = perm[b], perm[a]
        for a in range(n):
            adj[a, perm[a]] = True
    return Bigraph(n, n, adj=adj)


rng = random.Random(1)

k33 = Bigraph(3, 3, adj=np.ones((3, 3), dtype=bool))
print("C4(K_{3,3}) =", c4_count(k33), "(closed form C(3,2)^2 = 9)")

n = 200
g = regular_union(n, 100, rng)
print(f"\n100-regular union on {n}+{n}: density = {g.e() / n**2:.3f}")
print("certified (eps^(1/13), 0.5)-regular:", certify_regular_c4(g, 0.05, 0.5, n=n))
print("super-regular witness:", is_super_regular(g, 0.05, 0.5))

m = math.floor((1 - 2 * 0.05 ** (1 / 3)) * 0.5 * n)
sub = m_factor(g, m)
print(f"\nm-factor at m={m}: found={sub is not None}, "
      f"degrees exact={bool(sub and all(sub.deg_a() == m) and all(sub.deg_b() == m))}")

match = perfect_matching(sub, rng)
print("perfect matching inside the factor:", len(match), "edges")

# a Hall violator when none exists
bad = Bigraph(3, 3, edges=[(0, 2), (1, 2), (2, 2)])
res = perfect_matching(bad, rng)
print("\nall of A crammed onto one B vertex -> Hall violator:", res.violator)
