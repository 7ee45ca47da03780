import random
from itertools import combinations, product

import pytest

from hypack.candidacy import (
    CandidacyGraph,
    build_candidacy,
    build_labelling,
    check_well_intersecting,
    suitable_pairs_E,
    suitable_set_X,
)
from hypack.hypercore import KGraph
from hypack.patterns import canon, first_pattern, second_pattern
from oracles import oracle_candidacy_edge, oracle_label_stats


def clustered_instance(rng, r=4, per=3, k=3, guest_edges=6, host_density=0.7):
    """One guest + host over aligned r x per clusters, random partial packing."""
    n = r * per
    cof = {v: v // per for v in range(n)}
    hparts = {i: list(range(i * per, (i + 1) * per)) for i in range(r)}
    gedges = set()
    tries = 0
    while len(gedges) < guest_edges and tries < 300:
        tries += 1
        cls = rng.sample(range(r), k)
        e = tuple(sorted(rng.randrange(per) + c * per for c in cls))
        gedges.add(e)
    guest = KGraph(k, n, gedges)
    hedges = set()
    for cls in combinations(range(r), k):
        for combo in product(*(hparts[c] for c in cls)):
            if rng.random() < host_density:
                hedges.add(tuple(sorted(combo)))
    host = KGraph(k, n, hedges)
    embedded = set(rng.sample(range(r), 2))
    phi_plus = {}
    for i in embedded:
        xs = [v for v in range(n) if cof[v] == i]
        vs = list(hparts[i])
        rng.shuffle(vs)
        for x, v in zip(xs, vs):
            phi_plus[x] = v
    return guest, cof, hparts, host, embedded, phi_plus


def test_build_candidacy_empty_packing_complete():
    rng = random.Random(0)
    guest, cof, hparts, host, _, _ = clustered_instance(rng)
    cg = build_candidacy(guest, 0, cof, (0,), {}, set(), host, hparts)
    for x in hparts and [v for v in range(guest.n) if cof[v] == 0]:
        assert cg.candidates(x) == set(hparts[0])


def test_single_cluster_candidacy_matches_oracle():
    rng = random.Random(1)
    for trial in range(25):
        guest, cof, hparts, host, embedded, phi_plus = clustered_instance(rng)
        free = [i for i in range(4) if i not in embedded]
        i = rng.choice(free)
        cg = build_candidacy(guest, 0, cof, (i,), phi_plus, embedded, host, hparts)
        for x in [v for v in range(guest.n) if cof[v] == i]:
            for v in hparts[i]:
                want = oracle_candidacy_edge(
                    guest.edges, cof, (i,), {i: x}, {i: v}, phi_plus, embedded, host.has_edge
                )
                assert (v in cg.candidates(x)) == want, (trial, x, v)


def test_multi_cluster_candidacy_matches_oracle():
    rng = random.Random(2)
    mismatches = 0
    for trial in range(25):
        guest, cof, hparts, host, embedded, phi_plus = clustered_instance(rng)
        free = [i for i in range(4) if i not in embedded]
        I = tuple(sorted(free))
        cg = build_candidacy(guest, 0, cof, I, phi_plus, embedded, host, hparts)
        xs_pool = [[v for v in range(guest.n) if cof[v] == i] for i in I]
        for xs in product(*xs_pool):
            for vs in product(*(hparts[i] for i in I)):
                xd = dict(zip(I, xs))
                vd = dict(zip(I, vs))
                want = oracle_candidacy_edge(
                    guest.edges, cof, I, xd, vd, phi_plus, embedded, host.has_edge
                )
                got = cg.has_edge(xd, vd)
                assert got == want, (trial, xd, vd)
    assert mismatches == 0


def test_certificate_faithfulness():
    # reconstructing N(x) from the certificate family reproduces adjacency
    rng = random.Random(3)
    guest, cof, hparts, host, embedded, phi_plus = clustered_instance(rng)
    free = [i for i in range(4) if i not in embedded]
    i = free[0]
    cg = build_candidacy(guest, 0, cof, (i,), phi_plus, embedded, host, hparts)
    for x, certs in cg.certs.items():
        recon = set(hparts[i])
        for c in certs:
            recon &= {t[0] for t in host.neighborhood(c)}
        assert recon == cg.candidates(x)


def test_well_intersecting_reports():
    host = KGraph(3, 9, combinations(range(9), 3))
    hparts = {0: [0, 1, 2]}
    cg = CandidacyGraph(0, (0,), "A", host, hparts)
    for x in (100, 101, 102):
        cg.certs[x] = []
        cg.neigh[x] = set(hparts[0])
    rep = check_well_intersecting(cg, eps=0.1, q=2, n=3)
    assert rep.ok and rep.max_family == 0
    cg.add_certificate(100, (3, 4))
    cg.add_certificate(101, (3, 4))
    cg.add_certificate(102, (5, 6))
    rep = check_well_intersecting(cg, eps=0.1, q=1, n=3)
    assert rep.max_family == 1
    assert rep.overlap_census.get(100) == 1 and rep.overlap_census.get(101) == 1
    # overlap bound n^{1/4+eps} with tiny n: the shared pair may exceed it
    rep2 = check_well_intersecting(cg, eps=0.01, q=1, n=2)
    assert rep2.max_overlaps == 1


def test_labelling_shared_label_and_stats():
    # two guests whose edges complete on the same host pair: the shared host
    # edge appears as a label on both cluster edges
    cof = {0: 0, 1: 1, 2: 2}
    g1 = KGraph(3, 3, [(0, 1, 2)])
    g2 = KGraph(3, 3, [(0, 1, 2)])
    hparts = {0: [10, 11], 1: [20, 21], 2: [30, 31]}
    host_edges = [tuple(sorted((a, b, c))) for a in hparts[0] for b in hparts[1] for c in hparts[2]]
    host = KGraph(3, 32, host_edges)
    phi1 = {0: 10, 1: 20}
    phi2 = {0: 10, 1: 20}
    cands = {}
    for gi in (0, 1):
        cg = CandidacyGraph(gi, (2,), "A", host, hparts)
        cg.certs[2] = [(10, 20)]
        cg.neigh[2] = {30, 31}
        cands[gi] = cg
    lab = build_labelling([g1, g2], [cof, cof], 2, cands, [phi1, phi2], host)
    shared = tuple(sorted((10, 20, 30)))
    assert shared in lab.labels_of((0, 2, 30))
    assert shared in lab.labels_of((1, 2, 30))
    assert lab.delta == 2  # the label appears on one edge per guest
    d, dc = oracle_label_stats(lab.psi)
    assert (lab.delta, lab.delta_c) == (d, dc)


def test_labelling_no_embedded_edges_empty():
    cof = {0: 0, 1: 1, 2: 2}
    g = KGraph(3, 3, [(0, 1, 2)])
    hparts = {0: [10], 1: [20], 2: [30]}
    host = KGraph(3, 31, [(10, 20, 30)])
    cg = CandidacyGraph(0, (0,), "A", host, hparts)
    cg.certs[0] = []
    cg.neigh[0] = {10}
    lab = build_labelling([g], [cof], 0, {0: cg}, [{}], host)
    assert lab.labels_of((0, 0, 10)) == frozenset()
    assert lab.delta == 0 and lab.norm == 0


def test_labelling_out_of_sync_raises():
    cof = {0: 0, 1: 1, 2: 2}
    g = KGraph(3, 3, [(0, 1, 2)])
    hparts = {0: [10], 1: [20], 2: [30]}
    host = KGraph(3, 31, [])  # image edge missing from G_A
    cg = CandidacyGraph(0, (2,), "A", host, hparts)
    cg.certs[2] = []
    cg.neigh[2] = {30}
    with pytest.raises(RuntimeError):
        build_labelling([g], [cof], 2, {0: cg}, [{0: 10, 1: 20}], host)


def test_label_conservation():
    rng = random.Random(5)
    guest, cof, hparts, host, embedded, phi_plus = clustered_instance(rng, host_density=1.0)
    free = [i for i in range(4) if i not in embedded]
    cluster = free[0]
    phi = {x: v for x, v in phi_plus.items()}
    cg = build_candidacy(guest, 0, cof, (cluster,), phi_plus, embedded, host, hparts)
    lab = build_labelling([guest], [cof], cluster, {0: cg}, [phi], host)
    total_by_edge = sum(len(labs) for labs in lab.psi.values())
    by_label: dict = {}
    for key, labs in lab.psi.items():
        for l in labs:
            by_label[l] = by_label.get(l, 0) + 1
    assert total_by_edge == sum(by_label.values())


def test_suitable_set_x_matches_direct_enumeration():
    rng = random.Random(7)
    for trial in range(15):
        guest, cof, hparts, host, embedded, phi_plus = clustered_instance(
            rng, host_density=1.0
        )
        phi = dict(phi_plus)
        hco = {v: i for i, vs in hparts.items() for v in vs}
        cands = {}
        for size in (1, 2):
            for I in combinations([i for i in range(4) if i not in embedded], size):
                cands[(0, I)] = build_candidacy(
                    guest, 0, cof, I, phi_plus, embedded, host, hparts
                )
        rank = {i: i for i in range(4)}
        host_edges = sorted(host.edges)
        rng.shuffle(host_edges)
        for gE in host_edges[:5]:
            cls = tuple(sorted(hco[v] for v in gE))
            if all(c in embedded for c in cls):
                continue
            found = suitable_set_X(
                [guest], [cof], rank, gE, hco, None, None, [phi], cands, embedded
            )
            # direct: guest edges of this class whose embedded part maps onto
            # gE and whose free part is candidacy-mappable
            direct = set()
            inv = {w: u for u, w in phi.items()}
            for e in guest.edges:
                ecls = tuple(sorted(cof[u] for u in e))
                if ecls != cls:
                    continue
                ok = True
                xm = {}
                for u in e:
                    c = cof[u]
                    w = next(v for v in gE if hco[v] == c)
                    if c in embedded:
                        if phi.get(u) != w:
                            ok = False
                            break
                    else:
                        xm[c] = u
                if not ok:
                    continue
                I = tuple(sorted(xm))
                vd = {c: next(v for v in gE if hco[v] == c) for c in I}
                if cands[(0, I)].has_edge(xm, vd):
                    direct.add(tuple(sorted(xm.items())))
            got = {tuple(sorted(xs.items())) for _, xs in found}
            assert got == direct, (trial, gE)


def test_suitable_set_x_pattern_filter():
    rng = random.Random(11)
    guest, cof, hparts, host, embedded, phi_plus = clustered_instance(rng, host_density=1.0)
    phi = dict(phi_plus)
    hco = {v: i for i, vs in hparts.items() for v in vs}
    rank = {i: i for i in range(4)}
    cands = {}
    for gE in sorted(host.edges)[:8]:
        cls = tuple(sorted(hco[v] for v in gE))
        if all(c in embedded for c in cls):
            continue
        allt = suitable_set_X([guest], [cof], rank, gE, hco, None, None, [phi], cands, embedded)
        # summing over realized (p, pp) recovers the unfiltered set
        by_quad = {}
        for gi, xm in allt:
            pre = {c: next(u for u, w in phi.items() if w == v and cof[u] == c)
                   for c, v in ((hco[v], v) for v in gE) if c in embedded}
            xfull = dict(pre)
            xfull.update(xm)
            p = canon(first_pattern(guest, cof, rank, xfull, (), "A"))
            pp = canon(second_pattern(guest, cof, rank, xfull, (), "A"))
            by_quad.setdefault((p, pp), []).append(xm)
        total = 0
        for (p, pp), members in by_quad.items():
            sel = suitable_set_X([guest], [cof], rank, gE, hco, p, pp, [phi], cands, embedded)
            assert len(sel) == len(members)
            total += len(sel)
        assert total == len(allt)


def test_suitable_pairs_shared_last_vertex():
    rng = random.Random(13)
    guest, cof, hparts, host, embedded, phi_plus = clustered_instance(
        rng, guest_edges=8, host_density=1.0
    )
    hco = {v: i for i, vs in hparts.items() for v in vs}
    phi = dict(phi_plus)
    pairs_checked = 0
    host_edges = sorted(host.edges)
    for gE in host_edges[:20]:
        last = max(gE, key=lambda v: hco[v])
        for hE in host.incidence[last]:
            if hE == gE or len(set(hE) & set(gE)) != 1:
                continue
            if max(hE, key=lambda v: hco[v]) != last:
                continue
            if sorted(hco[v] for v in hE) == sorted(hco[v] for v in gE):
                continue
            found = suitable_pairs_E(
                [guest], [cof], gE, hE, hco, [phi], {}, embedded
            )
            for gi, e, f in found:
                shared_cluster = hco[last]
                assert {u for u in e if cof[u] == shared_cluster} == {
                    u for u in f if cof[u] == shared_cluster
                }
            pairs_checked += 1
            if pairs_checked > 10:
                return


def test_candidacy_dump_format():
    host = KGraph(3, 6, combinations(range(6), 3))
    cg = CandidacyGraph(0, (0,), "A", host, {0: [0, 1]})
    cg.certs[5] = [(1, 2)]
    cg.neigh[5] = {0}
    d = cg.dump()
    assert d["side"] == "A" and d["certs"]["5"] == [[1, 2]]
