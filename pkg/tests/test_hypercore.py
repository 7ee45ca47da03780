import random
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypack.hypercore import (
    KGraph,
    VertexSetFamily,
    is_typical,
    is_typical_wrt_reduced,
    max_m_degree,
    shadow,
    shadow_power,
)
from oracles import oracle_joint_neighborhood, oracle_max_m_degree, oracle_neighborhood


def complete(n, k=3):
    return KGraph(k, n, combinations(range(n), k))


def random_kgraph(n, k, m, rng):
    pool = list(combinations(range(n), k))
    return KGraph(k, n, rng.sample(pool, min(m, len(pool))))


def test_kgraph_validation():
    with pytest.raises(ValueError):
        KGraph(3, 5, [(0, 1)])
    with pytest.raises(ValueError):
        KGraph(3, 5, [(0, 1, 5)])
    with pytest.raises(ValueError):
        KGraph(1, 5, [])
    g = KGraph(3, 5, [(2, 0, 1), (0, 1, 2)])
    assert g.e() == 1  # duplicates collapse


def test_neighborhood_complete():
    g = complete(4)
    assert g.neighborhood({0, 1}) == {(2,), (3,)}
    g5 = complete(5)
    assert g5.degree({0}) == 6  # C(4,2)


def test_neighborhood_errors():
    g = complete(4)
    with pytest.raises(ValueError):
        g.neighborhood({0, 1, 2})
    with pytest.raises(ValueError):
        g.neighborhood({9})


def test_neighborhood_random_vs_scan():
    rng = random.Random(7)
    g = random_kgraph(5, 3, 4, rng)
    for S in [{0}, {1, 2}, {3}]:
        assert g.neighborhood(S) == oracle_neighborhood(g.edges, S)


def test_joint_neighborhood_complete():
    g = complete(6)
    assert g.joint_neighborhood([{0, 1}, {2, 3}]) == {4, 5}
    assert g.joint_neighborhood([{0, 1}]) == {t[0] for t in g.neighborhood({0, 1})}
    with pytest.raises(ValueError):
        g.joint_neighborhood([])


def test_joint_neighborhood_binomial_vs_scan():
    rng = random.Random(11)
    g = random_kgraph(40, 3, 600, rng)
    fams = [[(0, 1), (2, 3)], [(4, 5), (6, 7)], [(1, 9)]]
    for fam in fams:
        assert g.joint_neighborhood(fam) == oracle_joint_neighborhood(g.edges, fam)


@given(st.integers(6, 12), st.integers(0, 40), st.integers(1, 97))
@settings(max_examples=25, deadline=None)
def test_joint_neighborhood_splits_over_union(n, m, seed):
    rng = random.Random(seed)
    g = random_kgraph(n, 3, m + 5, rng)
    sets = list(combinations(range(n), 2))
    f1 = [rng.choice(sets) for _ in range(2)]
    f2 = [rng.choice(sets) for _ in range(2)]
    joint = g.joint_neighborhood(set(f1) | set(f2))
    assert joint == g.joint_neighborhood(f1) & g.joint_neighborhood(f2)


def test_vertex_set_family_bounds():
    with pytest.raises(ValueError):
        VertexSetFamily.of([(0, 1), (2, 3)], t=1)
    fam = VertexSetFamily.of([(0, 1)], t=2)
    assert fam.members == ((0, 1),)


def test_typical_complete():
    g = complete(30)
    rep = is_typical(g, eps=0.2, t=2, d=1.0)
    assert rep.ok and not rep.sampled


def test_typical_isolated_vertex_fails():
    edges = [e for e in combinations(range(12), 3) if 0 not in e]
    g = KGraph(3, 12, edges)
    rep = is_typical(g, eps=0.3, t=1, d=0.5)
    assert not rep.ok
    assert 0 in set(v for S in rep.worst_family for v in S)


def test_typical_binomial_monte_carlo():
    # tolerance sits above the binomial noise floor ~1/sqrt(d^2 n)
    ok = 0
    for seed in range(10):
        rng = random.Random(seed)
        edges = [e for e in combinations(range(80), 3) if rng.random() < 0.7]
        g = KGraph(3, 80, edges)
        rep = is_typical(g, 0.5, 2, 0.7, rng=rng, exhaustive_cap=0, samples=300)
        ok += rep.ok
    assert ok >= 8


def test_typical_rejects_zero_density():
    with pytest.raises(ValueError):
        is_typical(complete(6), 0.1, 1, 0.0)


def test_typical_exhaustive_matches_literal_definition():
    rng = random.Random(3)
    g = random_kgraph(9, 3, 40, rng)
    eps, t, d = 0.5, 2, 0.5
    rep = is_typical(g, eps, t, d)
    sets2 = list(combinations(range(9), 2))
    literal = True
    for s in (1, 2):
        for fam in combinations(sets2, s):
            size = len(oracle_joint_neighborhood(g.edges, fam))
            if abs(size - d**s * 9) > eps * d**s * 9:
                literal = False
                break
        if not literal:
            break
    assert rep.ok == literal


def test_typical_wrt_reduced_complete_multipartite():
    parts = [[0, 1, 2], [3, 4, 5], [6, 7, 8]]
    edges = [(a, b, c) for a in parts[0] for b in parts[1] for c in parts[2]]
    g = KGraph(3, 9, edges)
    red = KGraph(3, 3, [(0, 1, 2)])
    rep = is_typical_wrt_reduced(g, parts, red, eps=0.01, t=2, d=1.0)
    assert rep.ok


def test_typical_wrt_reduced_missing_pair_fails():
    parts = [[0, 1], [2, 3], [4, 5]]
    g = KGraph(3, 6, [])  # reduced demands crossing edges, host has none
    red = KGraph(3, 3, [(0, 1, 2)])
    rep = is_typical_wrt_reduced(g, parts, red, eps=0.2, t=1, d=0.5)
    assert not rep.ok


def test_max_m_degree_complete():
    g = complete(5)
    assert max_m_degree(g, 2) == 3
    assert max_m_degree(g, 1) == 6


def test_max_m_degree_random():
    rng = random.Random(5)
    g = random_kgraph(10, 3, 12, rng)
    for m in (1, 2):
        assert max_m_degree(g, m) == oracle_max_m_degree(g.edges, 10, m)


def test_max_m_degree_monotone():
    rng = random.Random(9)
    g = random_kgraph(12, 3, 30, rng)
    assert max_m_degree(g, 1) <= g.n * max_m_degree(g, 2)


def test_shadow_single_edge():
    g = KGraph(3, 3, [(0, 1, 2)])
    s = shadow(g)
    assert set(map(frozenset, s.edges())) == {
        frozenset({0, 1}), frozenset({0, 2}), frozenset({1, 2})
    }


def test_shadow_disjoint_edges_square_adds_nothing():
    g = KGraph(3, 6, [(0, 1, 2), (3, 4, 5)])
    s2 = shadow_power(g, 2)
    assert not s2.has_edge(0, 3)


def test_shadow_path_square_connects():
    g = KGraph(3, 5, [(0, 1, 2), (2, 3, 4)])
    s2 = shadow_power(g, 2)
    import networkx as nx

    base = shadow(g)
    dist = nx.single_source_shortest_path_length(base, 0)
    assert s2.has_edge(0, 3) == (dist[3] <= 2)
    assert s2.has_edge(0, 4) == (dist[4] <= 2)
    assert s2.has_edge(0, 3) and s2.has_edge(0, 4)


def test_json_round_trip():
    rng = random.Random(2)
    g = random_kgraph(8, 3, 10, rng)
    assert KGraph.from_json(g.to_json()) == g


@given(st.integers(5, 10), st.integers(1, 40), st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_neighborhood_symmetry(n, m, seed):
    rng = random.Random(seed)
    g = random_kgraph(n, 3, m, rng)
    for e in list(g.edges)[:5]:
        S = set(e[:2])
        v = e[2]
        assert (v,) in g.neighborhood(S)
    for S in [set(rng.sample(range(n), 2)) for _ in range(3)]:
        for (v,) in g.neighborhood(S):
            assert g.has_edge(tuple(S | {v}))
