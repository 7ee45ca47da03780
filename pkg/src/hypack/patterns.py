"""Pattern vectors, pattern classes, and the tester taxonomy.

Pattern vectors classify, per cluster, how guest edges trail off a vertex
tuple: the first pattern counts edges whose last vertex outside the tuple
sits in a given cluster (with at least two trailing tuple vertices), the
second counts edges whose penultimate-cluster vertex is a tuple vertex and
whose single trailing vertex lies in the tuple. Side B works on the copied
supergraph H_J - H, realized here without materializing copies: a copied
edge is an (edge, copied-vertex) pair whose copy sits outside every cluster.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .hypercore import KGraph

__all__ = [
    "first_pattern",
    "second_pattern",
    "pattern_quad",
    "canon",
    "pattern_class",
    "SetTester",
    "VertexTester",
    "EdgeTesterSpec",
    "LocalTester",
    "eval_set_tester",
    "eval_vertex_tester",
    "eval_simple_edge_tester",
    "eval_general_edge_tester",
]


def _tuple_incident_edges(g: KGraph, xvals) -> list[tuple]:
    seen = set()
    out = []
    for v in xvals:
        for e in g.incidence[v]:
            if e not in seen:
                seen.add(e)
                out.append(e)
    return out


def first_pattern(g, cluster_of, rank, x: dict, J, Z: str) -> dict:
    """First pattern of the tuple x = {cluster: vertex} for side Z in {'A','B'}.

    `rank` orders clusters (prefixes are rank-downward closed). Returns a sparse
    {cluster: count} map. An edge counts at the cluster of its last vertex
    outside x' when at least two of its vertices trail beyond that cluster.
    """
    J = set(J)
    x_orig = {v for c, v in x.items() if c not in J}  # originals of I\J
    x_jset = {v for c, v in x.items() if c in J}
    out_vec: dict = {}
    for f in _tuple_incident_edges(g, x.values()):
        if Z == "A":
            _first_entry(f, None, cluster_of, rank, x_orig, out_vec)
        else:
            for c in f:
                if c in x_jset:  # copies of non-tuple vertices never lie in x'
                    _first_entry(f, c, cluster_of, rank, x_orig, out_vec)
    return out_vec


def _first_entry(f, copied, cluster_of, rank, x_orig, out_vec):
    reals = [v for v in f if v != copied]
    outside = [v for v in reals if v not in x_orig]
    if copied is None and not outside:
        return  # x' itself: excluded by the witness condition
    if copied is not None and not outside:
        return
    lead = max(outside, key=lambda v: rank[cluster_of[v]])
    lstar = cluster_of[lead]
    beyond = sum(1 for v in reals if rank[cluster_of[v]] > rank[lstar])
    if copied is not None:
        beyond += 1  # the copy trails beyond every cluster
    if beyond >= 2:
        out_vec[lstar] = out_vec.get(lstar, 0) + 1


def second_pattern(g, cluster_of, rank, x: dict, J, Z: str) -> dict:
    """Second pattern: edges whose penultimate-cluster vertex is an I\\J tuple
    vertex and whose single vertex beyond that cluster lies in x'."""
    J = set(J)
    x_orig = {v for c, v in x.items() if c not in J}
    x_jset = {v for c, v in x.items() if c in J}
    out_vec: dict = {}
    for f in _tuple_incident_edges(g, x.values()):
        if Z == "A":
            _second_entry(f, None, cluster_of, rank, x_orig, out_vec)
        else:
            for c in f:
                if c in x_jset:
                    _second_entry(f, c, cluster_of, rank, x_orig, out_vec)
    return out_vec


def _second_entry(f, copied, cluster_of, rank, x_orig, out_vec):
    reals = sorted((v for v in f if v != copied), key=lambda v: rank[cluster_of[v]])
    if copied is None:
        # the unique trailing vertex must lie alone in the top cluster and in x'
        top = [v for v in reals if cluster_of[v] == cluster_of[reals[-1]]]
        if len(top) != 1 or top[0] not in x_orig:
            return
        rest = reals[: len(reals) - 1]
        witness = [v for v in rest if cluster_of[v] == cluster_of[rest[-1]]]
    else:
        # the copy is the unique trailing vertex (it lies in x' by the caller's
        # filter); the top real cluster supplies the witness
        witness = [v for v in reals if cluster_of[v] == cluster_of[reals[-1]]]
    if len(witness) == 1 and witness[0] in x_orig:
        c = cluster_of[witness[0]]
        out_vec[c] = out_vec.get(c, 0) + 1


def canon(vec: dict) -> tuple:
    return tuple(sorted((c, m) for c, m in vec.items() if m))


def pattern_quad(g, cluster_of, rank, x: dict, J) -> tuple:
    """(pA, ppA, pB, ppB), each in canonical sparse form."""
    return (
        canon(first_pattern(g, cluster_of, rank, x, J, "A")),
        canon(second_pattern(g, cluster_of, rank, x, J, "A")),
        canon(first_pattern(g, cluster_of, rank, x, J, "B")),
        canon(second_pattern(g, cluster_of, rank, x, J, "B")),
    )


def pattern_class(guests, cluster_ofs, rank, quad, I, J) -> list:
    """E_H(P, I, J): tuples inside some guest edge whose four patterns equal
    `quad` (canonical form; None entries act as wildcards).

    Returns (guest_index, {cluster: vertex}) pairs, one per distinct tuple.
    """
    I = set(I)
    out = []
    for gi, g in enumerate(guests):
        cof = cluster_ofs[gi]
        seen = set()
        for e in g.edges:
            xs = {cof[v]: v for v in e if cof[v] in I}
            if len(xs) != len(I):
                continue
            key = tuple(sorted(xs.items()))
            if key in seen:
                continue
            seen.add(key)
            q = pattern_quad(g, cof, rank, xs, J)
            if all(w is None or w == qq for w, qq in zip(quad, q)):
                out.append((gi, xs))
    return out


@dataclass
class SetTester:
    """(W, Y_1..Y_m): W in one host cluster, each Y_j in the matching guest
    cluster of a distinct guest."""

    W: frozenset
    Ys: tuple  # ((guest_index, frozenset), ...)
    cluster: int | None = None

    def __post_init__(self):
        if len({gi for gi, _ in self.Ys}) != len(self.Ys):
            raise ValueError("set tester needs distinct guests")


def eval_set_tester(st: SetTester, phis: list[dict]) -> int:
    cur = set(st.W)
    for gi, Y in st.Ys:
        phi = phis[gi]
        cur &= {phi[y] for y in Y if y in phi}
        if not cur:
            return 0
    return len(cur)


@dataclass
class VertexTester:
    """Weight on I-tuples with one centre per cluster of I."""

    I: tuple
    centres: dict  # cluster -> host vertex
    omega: dict  # (guest_index, vertex tuple ordered by sorted(I)) -> weight
    ell: float = 1.0

    def total(self) -> float:
        return sum(self.omega.values())


def eval_vertex_tester(vt: VertexTester, phis: list[dict]) -> float:
    order = sorted(vt.I)
    want = tuple(vt.centres[i] for i in order)
    total = 0.0
    for (gi, xs), w in vt.omega.items():
        phi = phis[gi]
        if all(x in phi for x in xs) and tuple(phi[x] for x in xs) == want:
            total += w
    return total


@dataclass
class EdgeTesterSpec:
    """General edge tester data: initial weight on I-tuples, completion set J
    with the leftover markers J_X (exactly-unembedded) and J_V (uncovered
    centres), centres, pattern quad, and the weight cap."""

    I: tuple
    J: tuple
    J_X: tuple
    J_V: tuple
    centres: dict  # cluster -> host vertex
    omega_iota: dict  # (guest_index, vertex tuple ordered by sorted(I)) -> weight
    quad: tuple | None = None
    cap: float = 1.0
    name: str = ""

    def __post_init__(self):
        if not set(self.J) <= set(self.I):
            raise ValueError("J must be a subset of I")
        jx, jv = set(self.J_X), set(self.J_V)
        if jx & jv or not (jx | jv) <= set(self.J):
            raise ValueError("J_X, J_V must be disjoint subsets of J")
        if any(w < 0 or w > self.cap for w in self.omega_iota.values()):
            raise ValueError("weights must lie in [0, cap]")

    def total_iota(self) -> float:
        return sum(self.omega_iota.values())


@dataclass
class LocalTester:
    """Clean weight on ell-sets of one cluster's candidacy edges, cap s."""

    ell: int
    values: dict  # frozenset of ell candidacy edges (gi, x, v) -> weight
    cap: float

    def __post_init__(self):
        if self.ell > self.cap:
            raise ValueError("ell must not exceed the cap")
        for key, w in self.values.items():
            if not (0 <= w <= self.cap):
                raise ValueError("weight outside [0, cap]")
            if len(key) != self.ell:
                raise ValueError("key arity mismatch")
            per_guest: dict = {}
            for gi, x, v in key:
                per_guest.setdefault(gi, []).append((x, v))
            for pairs in per_guest.values():
                xs = [x for x, _ in pairs]
                vs = [v for _, v in pairs]
                if len(set(xs)) != len(xs) or len(set(vs)) != len(vs):
                    raise ValueError("local tester supported on a non-matching")


def eval_simple_edge_tester(spec: EdgeTesterSpec, state) -> float:
    """Simple edge tester total: J = J_X = J_V = empty."""
    if spec.J:
        raise ValueError("simple edge tester requires J = empty")
    return eval_general_edge_tester(spec, state)


def eval_general_edge_tester(spec: EdgeTesterSpec, state) -> float:
    """Total weight of the general edge tester against a packing state.

    `state` provides: embedded_clusters (set), phi / phi_plus per guest
    (dicts), embedded(gi, cluster) -> set of really-embedded guest vertices,
    a_member(gi, I_tuple, xdict, vdict) and b_member(gi, j, x, v) candidacy
    membership. Per mixed candidacy edge there is at most one suitable tuple,
    so the total is evaluated tuple-wise over supp(omega_iota).

    A tuple whose J-cluster vertex was dummy-embedded onto any centre is
    excluded (the phi_plus-avoidance condition), including the tie case where
    the dummy image coincides with the tuple's own centre.
    """
    order = sorted(spec.I)
    emb = state.embedded_clusters
    Jset, jx, jv = set(spec.J), set(spec.J_X), set(spec.J_V)
    centre_vals = set(spec.centres.values())
    i_r0 = [i for i in order if i not in emb and i not in Jset]
    total = 0.0
    for (gi, xs), w in spec.omega_iota.items():
        if w == 0:
            continue
        x = dict(zip(order, xs))
        phi = state.phi[gi]
        ok = True
        # (i) + centre coverage on the A side
        if i_r0:
            xd = {i: x[i] for i in i_r0}
            vd = {i: spec.centres[i] for i in i_r0}
            ok = state.a_member(gi, tuple(i_r0), xd, vd)
        # B-side edges for J clusters
        if ok:
            for j in spec.J:
                if not state.b_member(gi, j, x[j], spec.centres[j]):
                    ok = False
                    break
        # (ii) embedded non-J clusters must already sit on their centres
        if ok:
            for i in order:
                if i in emb and i not in Jset:
                    if phi.get(x[i]) != spec.centres[i]:
                        ok = False
                        break
        # (iii) uncovered centres for J_V
        if ok:
            for j in jv:
                if j in emb and spec.centres[j] in state.cluster_image(gi, j):
                    ok = False
                    break
        # (iv) exactly the J_X vertices are unembedded
        if ok:
            for i in order:
                if i in emb:
                    unemb = x[i] not in state.embedded(gi, i)
                    if unemb != (i in jx):
                        ok = False
                        break
        # (v) dummy images of J vertices avoid the centres
        if ok:
            for j in Jset:
                if j in emb and state.phi_plus[gi].get(x[j]) in centre_vals:
                    ok = False
                    break
        if ok:
            total += w
    return total
