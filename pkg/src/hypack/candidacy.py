"""Candidacy graphs, edge-set labellings, and suitable-edge sets.

Single-cluster candidacy graphs are stored as intersection certificates: each
guest vertex x carries a family S_x of (k-1)-sets of host vertices and its
candidate set is V_i ^ N_G(S_x), kept explicitly alongside. Multi-cluster
candidacy graphs are stored as constraint lists supporting membership queries
without materializing the 2|I|-partite edge set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .hypercore import KGraph
from .patterns import canon, first_pattern, second_pattern

__all__ = [
    "CandidacyGraph",
    "build_candidacy",
    "WellIntersectingReport",
    "check_well_intersecting",
    "EdgeLabelling",
    "build_labelling",
    "suitable_set_X",
    "suitable_pairs_E",
]


class CandidacyGraph:
    """Candidacy structure for one guest and one index set I.

    For |I| = 1 the certificates are primary and the neighbor sets are derived
    (and kept consistent under updates). For |I| >= 2 edges are realized by a
    constraint list: a tuple (x_i)_{i in I} may map onto (v_i)_{i in I} iff
    every recorded constraint whose guest part it extends lands on a host edge.
    """

    def __init__(self, guest_index: int, I, side: str, host_side: KGraph, base_parts):
        self.guest_index = guest_index
        self.I = tuple(sorted(I))
        self.side = side
        self.host = host_side
        self.base_parts = base_parts  # cluster -> host vertex list
        self.neigh: dict = {}
        self.certs: dict = {}
        self.constraints: dict = {}  # (cluster, guest vertex) -> [(partial, image, Im)]

    @property
    def single(self) -> bool:
        return len(self.I) == 1

    def add_certificate(self, x, cert: tuple):
        """Restrict x's candidates by one more (k-1)-set (|I| = 1 only)."""
        i = self.I[0]
        if x not in self.certs:
            self.certs[x] = []
            self.neigh[x] = set(self.base_parts[i])
        self.certs[x].append(cert)
        nb = {t[0] for t in self.host.neighborhood(cert)} if len(cert) == self.host.k - 1 else set()
        self.neigh[x] &= nb

    def candidates(self, x) -> set:
        if x in self.neigh:
            return self.neigh[x]
        return set(self.base_parts[self.I[0]])

    def add_constraint(self, partial: dict, image: tuple, i_m: tuple):
        key_items = tuple(sorted(partial.items()))
        for i, x in partial.items():
            self.constraints.setdefault((i, x), []).append((key_items, image, i_m))

    def has_edge(self, xdict: dict, vdict: dict) -> bool:
        if self.single:
            i = self.I[0]
            return vdict[i] in self.candidates(xdict[i])
        if len(set(vdict.values())) != len(vdict):
            return False
        seen = set()
        for i in self.I:
            for key_items, image, i_m in self.constraints.get((i, xdict[i]), ()):
                if (key_items, image, i_m) in seen:
                    continue
                seen.add((key_items, image, i_m))
                if any(xdict.get(c) != xv for c, xv in key_items):
                    continue
                cand = tuple(sorted(image + tuple(vdict[c] for c in i_m)))
                if not self.host.has_edge(cand):
                    return False
        return True

    def dump(self) -> dict:
        """Per-vertex certificate lists (debug fixture format)."""
        return {
            "guest": self.guest_index,
            "I": list(self.I),
            "side": self.side,
            "certs": {str(x): sorted(map(list, cs)) for x, cs in self.certs.items()},
        }


def build_candidacy(
    guest: KGraph,
    guest_index: int,
    cluster_of: dict,
    I,
    phi_plus: dict,
    embedded_clusters: set,
    host_side: KGraph,
    host_parts: dict,
    side: str = "A",
) -> CandidacyGraph:
    """Candidacy graph from scratch: a tuple edge survives iff every guest edge
    meeting it whose other vertices are all embedded maps into a host edge.

    `phi_plus` must cover every vertex of every embedded cluster (the
    cluster-injective extension); `host_parts` maps cluster -> host vertices.
    """
    I = tuple(sorted(I))
    cg = CandidacyGraph(guest_index, I, side, host_side, host_parts)
    iset = set(I)
    if len(I) == 1:
        i = I[0]
        xs = [v for v in cluster_of if cluster_of[v] == i]
        for x in xs:
            cg.certs.setdefault(x, [])
            cg.neigh.setdefault(x, set(host_parts[i]))
            for e in guest.incidence[x]:
                others = [u for u in e if u != x]
                if any(cluster_of[u] in iset for u in others):
                    continue
                if all(cluster_of[u] in embedded_clusters and u in phi_plus for u in others):
                    cert = tuple(sorted(phi_plus[u] for u in others))
                    cg.add_certificate(x, cert)
        return cg
    for e in guest.edges:
        ipart = {cluster_of[u]: u for u in e if cluster_of[u] in iset}
        if not ipart:
            continue
        others = [u for u in e if cluster_of[u] not in iset]
        if not all(cluster_of[u] in embedded_clusters and u in phi_plus for u in others):
            continue
        image = tuple(sorted(phi_plus[u] for u in others))
        cg.add_constraint(ipart, image, tuple(sorted(ipart)))
    return cg


@dataclass
class WellIntersectingReport:
    ok: bool
    max_family: int = 0
    max_overlaps: int = 0
    overlap_census: dict = field(default_factory=dict)  # x -> overlapping partners


def check_well_intersecting(cg: CandidacyGraph, eps: float, q: int, n: float) -> WellIntersectingReport:
    """(eps,q)-well-intersecting: every certificate family has at most q members
    and every vertex shares a certificate member with at most n^{1/4+eps} others."""
    if not cg.single:
        raise ValueError("well-intersecting applies to single-cluster candidacy")
    if not cg.certs and cg.neigh:
        raise ValueError("certificates missing")
    rep = WellIntersectingReport(ok=True)
    member_owners: dict = {}
    for x, certs in cg.certs.items():
        rep.max_family = max(rep.max_family, len(certs))
        for c in set(certs):
            member_owners.setdefault(c, []).append(x)
    partners: dict = {}
    for owners in member_owners.values():
        if len(owners) > 1:
            for a in owners:
                partners.setdefault(a, set()).update(o for o in owners if o != a)
    bound = n ** 0.25 * n**eps if n > 0 else 0
    for x, ps in partners.items():
        rep.overlap_census[x] = len(ps)
        rep.max_overlaps = max(rep.max_overlaps, len(ps))
    rep.ok = rep.max_family <= q and rep.max_overlaps <= bound
    return rep


@dataclass
class EdgeLabelling:
    """psi: cluster-0 candidacy edge -> set of consumed host edges."""

    psi: dict  # (guest_index, x, v) -> frozenset of host edge tuples
    norm: int = 0  # max labels on one edge
    delta: int = 0  # max edges carrying one fixed label
    delta_c: int = 0  # max edges carrying a fixed label pair

    def labels_of(self, key) -> frozenset:
        return self.psi.get(key, frozenset())


def build_labelling(
    guests: list,
    cluster_ofs: list,
    cluster: int,
    cand0: dict,
    phi_minus: list,
    host_a: KGraph,
) -> EdgeLabelling:
    """Edge-set labelling of the cluster candidacy graphs: mapping x onto v
    consumes phi(e \\ {x}) + {v} for every guest edge e through x whose other
    vertices are all really embedded.

    `cand0[gi]` is the cluster's CandidacyGraph for guest gi; `phi_minus[gi]`
    the strict partial packing. Labels must be host-side-A edges; a label off
    E(G_A) means candidacy and packing went out of sync.
    """
    psi = {}
    label_edges: dict = {}
    norm = 0
    for gi, g in enumerate(guests):
        cof = cluster_ofs[gi]
        phi = phi_minus[gi]
        cg = cand0.get(gi)
        if cg is None:
            continue
        xs = [x for x in cof if cof[x] == cluster]
        for x in xs:
            base = []
            for e in g.incidence[x]:
                others = [u for u in e if u != x]
                if all(u in phi for u in others):
                    base.append(tuple(sorted(phi[u] for u in others)))
            for v in cg.candidates(x):
                labels = set()
                for img in base:
                    lab = tuple(sorted(img + (v,)))
                    if not host_a.has_edge(lab):
                        raise RuntimeError(
                            f"label {lab} is not a G_A edge: candidacy out of sync"
                        )
                    labels.add(lab)
                key = (gi, x, v)
                psi[key] = frozenset(labels)
                norm = max(norm, len(labels))
                for lab in labels:
                    label_edges.setdefault(lab, []).append(key)
    delta = max((len(es) for es in label_edges.values()), default=0)
    pair_counts: dict = {}
    for key, labels in psi.items():
        for pair in combinations(sorted(labels), 2):
            pair_counts[pair] = pair_counts.get(pair, 0) + 1
    delta_c = max(pair_counts.values(), default=0)
    return EdgeLabelling(psi=psi, norm=norm, delta=delta, delta_c=delta_c)


def suitable_set_X(
    guests: list,
    cluster_ofs: list,
    rank: dict,
    g_edge: tuple,
    host_cluster_of: dict,
    p,
    pp,
    phis: list,
    cands: dict,
    embedded_clusters: set,
) -> list:
    """X_{g,p,p2nd,phi}: guest tuples still mappable onto the unembedded part
    of the host edge with first/second pattern (p, pp) (J = empty; canonical
    sparse vectors, None = wildcard).

    `cands[(gi, I)]` gives the CandidacyGraph for index set I (as sorted
    tuple). Returns (guest_index, {cluster: vertex}) pairs.
    """
    r_clusters = tuple(sorted(host_cluster_of[v] for v in g_edge))
    g_by_cluster = {host_cluster_of[v]: v for v in g_edge}
    I = tuple(sorted(c for c in r_clusters if c not in embedded_clusters))
    if not I:
        raise ValueError("host edge has no unembedded clusters")
    emb_part = {c: g_by_cluster[c] for c in r_clusters if c in embedded_clusters}
    out = []
    for gi, g in enumerate(guests):
        cof = cluster_ofs[gi]
        phi = phis[gi]
        inv = {w: u for u, w in phi.items()}
        pre = {}
        okpre = True
        for c, w in emb_part.items():
            u = inv.get(w)
            if u is None or cof[u] != c:
                okpre = False
                break
            pre[c] = u
        if not okpre:
            continue
        cg = cands.get((gi, I))
        seen = set()
        for e in g.edges:
            if sorted(cof[u] for u in e) != list(r_clusters):
                continue
            if {cof[u]: u for u in e if cof[u] in pre} != pre:
                continue
            xm = {cof[u]: u for u in e if cof[u] in set(I)}
            key = tuple(sorted(xm.items()))
            if key in seen:
                continue
            xfull = dict(pre)
            xfull.update(xm)
            pa = canon(first_pattern(g, cof, rank, xfull, (), "A"))
            ppa = canon(second_pattern(g, cof, rank, xfull, (), "A"))
            if (p is not None and pa != p) or (pp is not None and ppa != pp):
                continue
            vd = {c: g_by_cluster[c] for c in I}
            if cg is not None and not cg.has_edge(xm, vd):
                continue
            seen.add(key)
            out.append((gi, xm))
    return out


def suitable_pairs_E(
    guests: list,
    cluster_ofs: list,
    g_edge: tuple,
    h_edge: tuple,
    host_cluster_of: dict,
    phis: list,
    cand1: dict,
    embedded_clusters: set,
) -> list:
    """E_{g,h,phi}: pairs of guest edges jointly mappable onto two host edges
    sharing their last-cluster vertex, sharing a guest vertex in that cluster.

    `cand1[(gi, i)]` gives single-cluster candidacy graphs. Returns
    (guest_index, e, f) triples.
    """
    shared = set(g_edge) & set(h_edge)
    if len(shared) != 1:
        raise ValueError("host edges must share exactly one vertex")
    last = next(iter(shared))
    last_cluster = host_cluster_of[last]
    ranks = {v: host_cluster_of[v] for v in set(g_edge) | set(h_edge)}
    if max(ranks[v] for v in g_edge) != last_cluster or max(ranks[v] for v in h_edge) != last_cluster:
        raise ValueError("shared vertex must sit in the last cluster of both edges")
    out = []
    for gi, g in enumerate(guests):
        cof = cluster_ofs[gi]
        phi = phis[gi]
        inv = {w: u for u, w in phi.items()}

        def fits(z_edge):
            # candidate guest vertices per host vertex of z_edge
            per_v = []
            for w in z_edge:
                c = host_cluster_of[w]
                if c in embedded_clusters:
                    u = inv.get(w)
                    per_v.append({u} if u is not None and cof[u] == c else set())
                else:
                    cg = cand1.get((gi, c))
                    if cg is None:
                        per_v.append({x for x in cof if cof[x] == c})
                    else:
                        per_v.append({x for x in cg.neigh if w in cg.candidates(x)})
            found = []
            for e in g.edges:
                if sorted(cof[u] for u in e) != sorted(host_cluster_of[w] for w in z_edge):
                    continue
                if all(
                    u in per_v[idx]
                    for idx, w in enumerate(z_edge)
                    for u in e
                    if cof[u] == host_cluster_of[w]
                ):
                    found.append(e)
            return found

        eg, eh = fits(tuple(g_edge)), fits(tuple(h_edge))
        for e in eg:
            ex = {u for u in e if cof[u] == last_cluster}
            for f in eh:
                if ex & {u for u in f if cof[u] == last_cluster}:
                    out.append((gi, e, f))
    return out
