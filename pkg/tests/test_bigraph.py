import math
import random

import numpy as np
import pytest

from hypack.bigraph import (
    Bigraph,
    MatchingFailure,
    c4_count,
    certify_regular_c4,
    density,
    is_super_regular,
    m_factor,
    perfect_matching,
    sparse_edge_bound_check,
)
from oracles import oracle_c4


def complete_bigraph(n, m=None):
    m = n if m is None else m
    return Bigraph(n, m, adj=np.ones((n, m), dtype=bool))


def random_bigraph(na, nb, p, rng):
    adj = np.zeros((na, nb), dtype=bool)
    for a in range(na):
        for b in range(nb):
            adj[a, b] = rng.random() < p
    return Bigraph(na, nb, adj=adj)


def regular_union(n, m, rng):
    """Union of m random perfect matchings on n+n (exactly m-regular); each
    matching is collision-repaired against the union by random swaps."""
    adj = np.zeros((n, n), dtype=bool)
    for _ in range(m):
        perm = list(range(n))
        rng.shuffle(perm)
        for _ in range(50 * n):
            bad = [a for a in range(n) if adj[a, perm[a]]]
            if not bad:
                break
            a = rng.choice(bad)
            b = rng.randrange(n)
            if b != a and not adj[a, perm[b]] and not adj[b, perm[a]]:
                perm[a], perm[b] = perm[b], perm[a]
        else:
            raise RuntimeError("matching repair did not converge")
        for a in range(n):
            adj[a, perm[a]] = True
    return Bigraph(n, n, adj=adj)


def test_density_complete_and_empty():
    assert density(complete_bigraph(3)) == 1.0
    assert density(Bigraph(4, 4)) == 0.0
    with pytest.raises(ValueError):
        density(complete_bigraph(3), [], [0])


def test_density_random_window():
    rng = random.Random(1)
    g = random_bigraph(50, 50, 0.4, rng)
    assert abs(density(g) - 0.4) < 0.1


def test_c4_small_closed_forms():
    assert c4_count(complete_bigraph(3)) == 9  # C(3,2)^2
    assert c4_count(complete_bigraph(2)) == 1
    star = Bigraph(3, 3, edges=[(0, 0), (0, 1), (0, 2)])  # a forest
    assert c4_count(star) == 0


def test_c4_matches_brute_force():
    rng = random.Random(4)
    for _ in range(20):
        g = random_bigraph(rng.randint(2, 12), rng.randint(2, 12), rng.random(), rng)
        assert c4_count(g) == oracle_c4(g.adj.tolist())


def test_certify_complete():
    n = 20
    g = complete_bigraph(n)
    # C4 = C(n,2)^2 < (1+eps) n^4 / 4
    assert certify_regular_c4(g, eps=0.05, d=1.0, n=n)


def test_certify_disjoint_halves_fail():
    n = 20
    adj = np.zeros((n, n), dtype=bool)
    adj[: n // 2, : n // 2] = True
    adj[n // 2 :, n // 2 :] = True
    g = Bigraph(n, n, adj=adj)
    # density 1/2 but C4 excess: 2 * C(10,2)^2 vs (1+eps) (1/2)^4 n^4/4
    assert not certify_regular_c4(g, eps=0.1, d=0.5, n=n)


def test_certify_random_whp():
    ok = 0
    for seed in range(10):
        rng = random.Random(seed)
        g = random_bigraph(200, 200, 0.5, rng)
        ok += certify_regular_c4(g, eps=0.05, d=0.5, n=200)
    assert ok >= 8


def test_super_regular_complete():
    assert is_super_regular(complete_bigraph(12), 0.01, 1.0).ok


def test_super_regular_star_degree_witness():
    g = Bigraph(4, 4, edges=[(0, b) for b in range(4)])
    wit = is_super_regular(g, 0.2, 0.5)
    assert not wit.ok and wit.reason == "degree"


def test_super_regular_regular_union_monte_carlo():
    ok = 0
    for seed in range(10):
        rng = random.Random(seed)
        g = regular_union(150, 75, rng)
        ok += is_super_regular(g, 0.1, 0.5).ok
    assert ok >= 9


def test_m_factor_complete():
    n = 8
    g = complete_bigraph(n)
    full = m_factor(g, n)
    assert full is not None and full.e() == n * n
    one = m_factor(g, 1)
    assert one is not None
    assert all(one.deg_a() == 1) and all(one.deg_b() == 1)


def test_m_factor_output_regular_subgraph():
    rng = random.Random(7)
    g = regular_union(60, 30, rng)
    m = 12
    sub = m_factor(g, m)
    assert sub is not None
    assert all(sub.deg_a() == m) and all(sub.deg_b() == m)
    assert not (sub.adj & ~g.adj).any()  # subgraph of the input


def test_m_factor_infeasible():
    g = Bigraph(3, 3, edges=[(0, 0), (1, 0), (2, 0)])
    assert m_factor(g, 1) is None


def test_m_factor_super_regular_scaled():
    # (eps,d)-super-regular with eps=0.05, d=0.5 at n=200: m-factor at
    # m = floor((1-2 eps^{1/3}) d n) per the regularity toolkit contract
    rng = random.Random(11)
    g = regular_union(200, 100, rng)
    assert is_super_regular(g, 0.05, 0.5).ok
    m = math.floor((1 - 2 * 0.05 ** (1 / 3)) * 0.5 * 200)
    sub = m_factor(g, m)
    assert sub is not None
    assert all(sub.deg_a() == m) and all(sub.deg_b() == m)


def test_perfect_matching_complete_and_failure():
    rng = random.Random(0)
    g = complete_bigraph(9)
    match = perfect_matching(g, rng)
    assert isinstance(match, dict)
    assert sorted(match.values()) == list(range(9))
    bad = Bigraph(3, 3, edges=[(1, 0), (1, 1), (2, 2)])  # vertex 0 isolated
    res = perfect_matching(bad, rng)
    assert isinstance(res, MatchingFailure)
    assert 0 in res.violator
    nbh = set()
    for a in res.violator:
        nbh |= {b for b in range(3) if bad.adj[a, b]}
    assert len(nbh) < len(res.violator)


def test_perfect_matching_on_m_factor_outputs():
    rng = random.Random(3)
    g = regular_union(40, 8, rng)
    for m in (1, 3):
        sub = m_factor(g, m)
        assert sub is not None
        match = perfect_matching(sub, rng)
        assert isinstance(match, dict) and len(match) == 40
        for a, b in match.items():
            assert sub.adj[a, b]


def test_sparse_edge_bound():
    rng = random.Random(5)
    n = 200
    g = regular_union(n, 100, rng)
    eps, d = 0.2, 0.5
    # the literal size window is empty at desk scale: precondition error
    with pytest.raises(ValueError):
        sparse_edge_bound_check(g, [0, 1], [2, 3], eps, d, n=n)
    # the inequality itself, window unenforced
    eps = 0.05
    size = 60
    X = rng.sample(range(n), size)
    Y = rng.sample(range(n), size)
    assert sparse_edge_bound_check(g, X, Y, eps, d, n=n, enforce_window=False)
    assert sparse_edge_bound_check(g, [], Y, eps, d, n=n, enforce_window=False)
    # planted complete block violates the bound
    adj = g.adj.copy()
    adj[np.ix_(X, Y)] = True
    planted = Bigraph(n, n, adj=adj)
    assert size * size > eps ** (1 / 3) * d * n * size
    assert not sparse_edge_bound_check(planted, X, Y, eps, d, n=n, enforce_window=False)


def test_spot_regularity_after_certification():
    rng = random.Random(13)
    g = random_bigraph(150, 150, 0.5, rng)
    if certify_regular_c4(g, 0.05, 0.5, n=150):
        eps13 = 0.05 ** (1 / 13)
        side = math.ceil(eps13 * 150)
        for _ in range(50):
            W1 = rng.sample(range(150), side)
            W2 = rng.sample(range(150), side)
            assert abs(density(g, W1, W2) - 0.5) <= eps13 * 0.5 + 0.05


def test_bigraph_json_round_trip():
    rng = random.Random(8)
    g = random_bigraph(6, 7, 0.5, rng)
    g2 = Bigraph.from_json(g.to_json())
    assert (g2.adj == g.adj).all()
