"""Blow-up and packing instance construction and validation.

Covers instance validation, partition refinement (random assignment, swap
repair, random class permutation), host edge-splitting, reduced-graph
scheduling with its counters, and guest grouping/host slicing for the
non-multipartite route.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from itertools import combinations

import networkx as nx

from .hypercore import KGraph, is_typical, is_typical_wrt_reduced, shadow, shadow_power

__all__ = [
    "BlowupInstance",
    "validate_blowup",
    "WeightFn",
    "RefinementError",
    "RefinementReport",
    "refine_partitions",
    "refine_partitions_single",
    "SplitError",
    "split_host",
    "ClusterSchedule",
    "build_schedule",
    "group_and_slice",
]


@dataclass
class BlowupInstance:
    """Guests with cluster partitions, host with matching partition, reduced k-graph."""

    guests: list
    host: KGraph
    reduced: KGraph
    guest_parts: list  # guest -> cluster -> list of guest vertices
    host_parts: list  # cluster -> list of host vertices
    n: float  # declared per-cluster scale

    @property
    def k(self) -> int:
        return self.host.k

    @property
    def r(self) -> int:
        return self.reduced.n

    def cluster_of(self, gi: int) -> dict[int, int]:
        return {v: i for i, part in enumerate(self.guest_parts[gi]) for v in part}

    def host_cluster_of(self) -> dict[int, int]:
        return {v: i for i, part in enumerate(self.host_parts) for v in part}

    def to_json(self) -> str:
        return json.dumps(
            {
                "host": json.loads(self.host.to_json()),
                "guests": [json.loads(g.to_json()) for g in self.guests],
                "reduced": json.loads(self.reduced.to_json()),
                "guest_parts": self.guest_parts,
                "host_parts": self.host_parts,
                "params": {"n": self.n, "k": self.k, "r": self.r},
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, s: str) -> "BlowupInstance":
        d = json.loads(s)
        load = lambda dd: KGraph(dd["k"], dd["n"], dd["edges"])
        return cls(
            guests=[load(g) for g in d["guests"]],
            host=load(d["host"]),
            reduced=load(d["reduced"]),
            guest_parts=d["guest_parts"],
            host_parts=d["host_parts"],
            n=d["params"]["n"],
        )


def validate_blowup(b: BlowupInstance) -> list[tuple]:
    """Check the blow-up instance conditions; violations are data, not errors.

    Returned tuples are (kind, guest_index, detail).
    """
    out = []
    r = b.r
    host_cov = sorted(v for p in b.host_parts for v in p)
    if host_cov != list(range(b.host.n)):
        out.append(("host-partition", None, "host parts do not partition V(G)"))
    for gi, (g, parts) in enumerate(zip(b.guests, b.guest_parts)):
        if len(parts) != r:
            out.append(("guest-partition", gi, f"{len(parts)} parts, expected {r}"))
            continue
        cov = sorted(v for p in parts for v in p)
        if cov != list(range(g.n)):
            out.append(("guest-partition", gi, "parts do not partition V(H)"))
            continue
        cof = b.cluster_of(gi)
        for e in g.edges:
            idx = [cof[v] for v in e]
            if len(set(idx)) != len(idx):
                out.append(("edge-in-part", gi, e))
            elif not b.reduced.has_edge(idx):
                out.append(("edge-off-reduced", gi, e))
        for i in range(r):
            if abs(len(parts[i]) - b.n) > b.n / 2:
                out.append(("part-size", gi, (i, len(parts[i]))))
    for i in range(r):
        if abs(len(b.host_parts[i]) - b.n) > b.n / 2:
            out.append(("part-size", None, (i, len(b.host_parts[i]))))
    return out


@dataclass
class WeightFn:
    """Weight on cluster tuples: key maps a vertex (|I|=1) or an I-ordered vertex
    tuple to a non-negative value. For the single-partition variant, `I` holds
    the arity and keys are ordered vertex tuples."""

    I: tuple
    values: dict
    name: str = ""

    def total_on(self, keys) -> float:
        return sum(self.values.get(k, 0.0) for k in keys)

    def total(self) -> float:
        return sum(self.values.values())


class RefinementError(RuntimeError):
    pass


@dataclass
class RefinementReport:
    class_sizes: dict = field(default_factory=dict)  # (guest,cluster) -> sizes
    weight_deviations: list = field(default_factory=list)  # (name, guest, cluster, class, got, target, bound)
    swaps: int = 0


def _repair_classes(classes, adj, rng, budget: int):
    """Swap vertices between classes until each class is independent in `adj`.

    `classes` is a list of vertex lists (mutated in place); `adj` maps vertex ->
    set of conflicting vertices. Returns the number of swaps performed.
    """
    B = len(classes)
    where = {v: j for j, cls in enumerate(classes) for v in cls}

    def conflicted(v):
        j = where[v]
        return any(u in adj.get(v, ()) for u in classes[j] if u != v)

    swaps = 0
    for _ in range(budget):
        bad = [v for cls in classes for v in cls if conflicted(v)]
        if not bad:
            return swaps
        progress = False
        for v in bad:
            if not conflicted(v):
                continue
            j = where[v]
            targets = list(range(B))
            rng.shuffle(targets)
            done = False
            for j2 in targets:
                if j2 == j or any(u in adj.get(v, ()) for u in classes[j2]):
                    continue
                others = [u for u in classes[j2] if not (adj.get(u, set()) & (set(classes[j]) - {v}))]
                if not others:
                    continue
                u = rng.choice(others)
                classes[j].remove(v)
                classes[j2].remove(u)
                classes[j].append(u)
                classes[j2].append(v)
                where[v], where[u] = j2, j
                swaps += 1
                progress = done = True
                break
            if not done:
                continue
        if not progress:
            break
    bad = [v for cls in classes for v in cls if conflicted(v)]
    if bad:
        raise RefinementError(
            f"swap repair stuck with {len(bad)} conflicted vertices (budget {budget})"
        )
    return swaps


def _greedy_balanced_classes(verts, adj, B):
    """Smallest-conflict-free-class greedy in the given vertex order; succeeds
    whenever the order has conflict-bandwidth < B (tight paths/cycles)."""
    classes = [[] for _ in range(B)]
    for v in verts:
        order = sorted(range(B), key=lambda j: len(classes[j]))
        for j in order:
            if not (adj.get(v, set()) & set(classes[j])):
                classes[j].append(v)
                break
        else:
            raise RefinementError("greedy fallback failed to place a vertex")
    return classes


def _refine_one(vertices, adj, B, rng, budget):
    """Partition `vertices` into B classes, each independent in `adj`, sizes
    within one of each other. Returns (classes, swaps)."""
    verts = list(vertices)
    rng.shuffle(verts)
    rem = len(verts) % B
    peeled, core = verts[:rem], verts[rem:]
    size = len(core) // B
    classes = [core[j * size : (j + 1) * size] for j in range(B)]
    try:
        swaps = _repair_classes(classes, adj, rng, budget)
    except RefinementError:
        # random + swap cannot reach the tightly constrained solutions (e.g.
        # tight cycles at B = bandwidth + 1); rebuild greedily in index order
        # and re-balance by swaps
        ordered = sorted(core)
        classes = _greedy_balanced_classes(ordered, adj, B)
        sizes = [len(c) for c in classes]
        if max(sizes) - min(sizes) > 1:
            raise RefinementError("greedy fallback produced unbalanced classes")
        swaps = _repair_classes(classes, adj, rng, budget)
    for v in peeled:  # reinsert, smallest classes first, keeping independence
        order = sorted(range(B), key=lambda j: (len(classes[j]), rng.random()))
        for j in order:
            if not (adj.get(v, set()) & set(classes[j])):
                classes[j].append(v)
                break
        else:
            # swap a resident out of the smallest class to make room
            placed = False
            for j in order:
                for u in list(classes[j]):
                    for j2 in range(B):
                        if j2 == j or len(classes[j2]) > len(classes[j]):
                            continue
                        if not (adj.get(u, set()) & set(classes[j2])) and not (
                            adj.get(v, set()) & (set(classes[j]) - {u})
                        ):
                            classes[j].remove(u)
                            classes[j2].append(u)
                            classes[j].append(v)
                            placed = True
                            break
                    if placed:
                        break
                if placed:
                    break
            if not placed:
                raise RefinementError("could not reinsert a peeled vertex")
    return classes, swaps


def _square_adjacency(g: KGraph) -> dict[int, set]:
    sq = shadow_power(g, 2)
    return {v: set(sq.neighbors(v)) for v in sq.nodes}


def refine_partitions(
    guests: list[KGraph],
    parts: list,
    beta: float,
    weights: list[WeightFn] | None = None,
    rng: random.Random | None = None,
    swap_budget: int = 10,
):
    """Refine every cluster of every guest into beta^{-1} classes.

    Three phases per (guest, cluster): random balanced assignment, swap repair
    until every class is independent in H_*^2, then a random permutation of the
    class labels. Returns (refined, report) where refined[g][i][j] is class j
    of cluster i of guest g.
    """
    rng = rng or random.Random(0)
    B = round(1 / beta)
    if B < 1:
        raise ValueError("beta^{-1} must be >= 1")
    weights = weights or []
    refined = []
    report = RefinementReport()
    scale = max((len(p) for ps in parts for p in ps), default=0)
    for gi, (g, gparts) in enumerate(zip(guests, parts)):
        adj = _square_adjacency(g)
        out_g = []
        for ci, cluster in enumerate(gparts):
            if B > max(1, len(cluster)):
                raise ValueError(f"beta^-1={B} exceeds part size {len(cluster)}")
            classes, swaps = _refine_one(cluster, adj, B, rng, swap_budget)
            report.swaps += swaps
            rng.shuffle(classes)  # phase 3: random class permutation
            out_g.append(classes)
            report.class_sizes[(gi, ci)] = sorted(len(c) for c in classes)
        refined.append(out_g)
    for w in weights:
        if len(w.I) != 1:
            continue
        i = w.I[0]
        bound = beta ** 1.5 * scale
        for gi, out_g in enumerate(refined):
            total = w.total_on(parts[gi][i])
            for j, cls in enumerate(out_g[i]):
                got = w.total_on(cls)
                report.weight_deviations.append(
                    (w.name, gi, i, j, got, beta * total, bound)
                )
    return refined, report


def refine_partitions_single(
    guests: list[KGraph],
    beta: float,
    weights: list[WeightFn] | None = None,
    rng: random.Random | None = None,
    swap_budget: int = 10,
):
    """r=1 variant: refine V(H) of every guest into beta^{-1} classes.

    Weights here live on ordered vertex tuples; only arity-1 deviations are
    tracked in the report (the tuple conclusion is measured by callers).
    """
    rng = rng or random.Random(0)
    wrapped = [[list(range(g.n))] for g in guests]
    refined, report = refine_partitions(
        guests, wrapped, beta, None, rng, swap_budget
    )
    out = [g_ref[0] for g_ref in refined]
    scale = max((g.n for g in guests), default=0)
    for w in weights or []:
        if w.I != (1,):
            continue
        bound = beta ** 1.5 * scale
        for gi, classes in enumerate(out):
            total = w.total_on((v,) for v in range(guests[gi].n))
            for j, cls in enumerate(classes):
                got = w.total_on((v,) for v in cls)
                report.weight_deviations.append(
                    (w.name, gi, 0, j, got, beta * total, bound)
                )
    return out, report


class SplitError(RuntimeError):
    def __init__(self, msg, worst=0.0):
        super().__init__(msg)
        self.worst = worst


def split_host(
    g: KGraph,
    gamma: float,
    rng: random.Random,
    d: float,
    parts: list | None = None,
    reduced: KGraph | None = None,
    eps0: float = 0.2,
    t: int = 2,
    retries: int = 5,
    samples: int = 300,
):
    """Bernoulli(gamma) edge split of the host into (G_A, G_B).

    Verifies by sampling that joint neighborhoods split proportionally:
    |V_i ^ N_{G_A}(S_A) ^ N_{G_B}(S_B)| = (1 +- eps0) d_A^{|S_A|} d_B^{|S_B|} n
    with d_A = (1-gamma) d and d_B = gamma d; re-rolls on failure up to the
    retry budget.
    """
    if not (0 < gamma < 1):
        raise ValueError("gamma must lie strictly between 0 and 1")
    d_a, d_b = (1 - gamma) * d, gamma * d
    worst_overall = 0.0
    for _ in range(max(1, retries)):
        ea, eb = [], []
        for e in g.edges:
            (eb if rng.random() < gamma else ea).append(e)
        g_a, g_b = KGraph(g.k, g.n, ea), KGraph(g.k, g.n, eb)
        worst = _joint_split_deviation(
            g_a, g_b, d_a, d_b, parts, reduced, t, rng, samples
        )
        worst_overall = max(worst_overall, 0.0) if worst <= eps0 else max(worst_overall, worst)
        if worst <= eps0:
            return g_a, g_b, worst
    raise SplitError(
        f"split verification failed after {retries} retries (worst deviation {worst_overall:.3f})",
        worst=worst_overall,
    )


def _joint_split_deviation(g_a, g_b, d_a, d_b, parts, reduced, t, rng, samples) -> float:
    k, n = g_a.k, g_a.n
    worst = 0.0
    if parts is not None and reduced is not None:
        r = len(parts)
        pool_of = []
        for i in range(r):
            sets_i = []
            for re in reduced.edges:
                if i in re:
                    others = [parts[j] for j in re if j != i]
                    sets_i.append(others)
            pool_of.append(sets_i)
        for _ in range(samples):
            i = rng.randrange(r)
            if not pool_of[i] or not parts[i]:
                continue
            fam = []
            for _ in range(rng.randint(1, t)):
                pools = rng.choice(pool_of[i])
                fam.append(tuple(sorted(rng.choice(p) for p in pools)))
            fam = list(dict.fromkeys(fam))
            na = rng.randint(0, len(fam))
            sa, sb = fam[:na], fam[na:]
            base = set(parts[i])
            worst = max(worst, _one_joint_dev(g_a, g_b, sa, sb, base, d_a, d_b, len(parts[i])))
    else:
        allsets = list(combinations(range(n), k - 1))
        for _ in range(samples):
            fam = rng.sample(allsets, rng.randint(1, t))
            na = rng.randint(0, len(fam))
            sa, sb = fam[:na], fam[na:]
            worst = max(worst, _one_joint_dev(g_a, g_b, sa, sb, set(range(n)), d_a, d_b, n))
    return worst


def _one_joint_dev(g_a, g_b, sa, sb, base, d_a, d_b, scale) -> float:
    cur = set(base)
    for S in sa:
        cur &= {t[0] for t in g_a.neighborhood(S)}
        if not cur:
            break
    if cur:
        for S in sb:
            cur &= {t[0] for t in g_b.neighborhood(S)}
            if not cur:
                break
    target = d_a ** len(sa) * d_b ** len(sb) * scale
    if target <= 0:
        return float("inf")
    # multiplicative deviation beyond the per-window sampling noise floor
    noise = 2.0 * math.sqrt(target) + 1.0
    return max(0.0, abs(len(cur) - target) - noise) / target


@dataclass
class ClusterSchedule:
    """Proper coloring of R_*^3 and the processing order and counters it induces.

    Positions are 1-based: `order[q-1]` is the original cluster id processed at
    round q. Counters follow the driver's definitions: c_i(q) is the largest
    color among processed closed R_*-neighbors of i, m_i(q) the number of
    reduced edges through i whose other k-1 clusters are all processed.
    """

    order: list
    colors: dict
    T: int
    reduced: KGraph

    def __post_init__(self):
        self.pos = {c: q + 1 for q, c in enumerate(self.order)}
        rstar = shadow(self.reduced)
        self._nstar = {i: set(rstar.neighbors(i)) | {i} for i in range(self.reduced.n)}

    @property
    def r(self) -> int:
        return len(self.order)

    def processed(self, q: int) -> list:
        return self.order[:q]

    def c_i(self, i: int, q: int) -> int:
        done = set(self.order[:q])
        return max((self.colors[j] for j in self._nstar[i] & done), default=0)

    def c_I(self, I, q: int) -> int:
        return max((self.c_i(i, q) for i in I), default=0)

    def m_i(self, i: int, q: int) -> int:
        done = set(self.order[:q])
        return sum(
            1 for e in self.reduced.edges if i in e and all(j in done for j in e if j != i)
        )

    def b_i(self, i: int, q: int) -> int:
        """Reduced edges through i and the round-q cluster whose remaining
        clusters were processed earlier (activated constraints this round)."""
        cur = self.order[q - 1]
        if i == cur:
            return 0
        before = set(self.order[: q - 1])
        return sum(
            1
            for e in self.reduced.edges
            if cur in e and i in e and all(j in before for j in e if j not in (cur, i))
        )


def build_schedule(reduced: KGraph, alpha: float) -> ClusterSchedule:
    """Greedy proper coloring of R_*^3, clusters relabelled so colors are
    non-decreasing along the processing order."""
    deg = {i: 0 for i in range(reduced.n)}
    for e in reduced.edges:
        for v in e:
            deg[v] += 1
    dmax = max(deg.values(), default=0)
    if dmax > 1 / alpha:
        raise ValueError(f"Delta(R)={dmax} exceeds alpha^-1={1 / alpha:.1f}")
    cube = shadow_power(reduced, 3)
    coloring = nx.greedy_color(cube, strategy="largest_first")
    colors = {i: coloring.get(i, 0) + 1 for i in range(reduced.n)}
    order = sorted(range(reduced.n), key=lambda i: (colors[i], i))
    T = math.ceil(reduced.k**3 / alpha**3)
    return ClusterSchedule(order=order, colors=colors, T=T, reduced=reduced)


def group_and_slice(
    guests: list[KGraph],
    host: KGraph,
    P: int,
    rng: random.Random,
    d: float,
    eps: float = 0.3,
    t: int = 2,
    retries: int = 5,
):
    """Uniform random grouping of guests into P collections and of host edges
    into P slices; each slice must stay typical at density d/P (sampled check)
    and each group must respect the sliced edge budget."""
    if P < 1:
        raise ValueError("P must be >= 1")
    if P == 1:
        return [list(guests)], [host]
    total_e = sum(g.e() for g in guests)
    n = host.n
    budget = (1 + eps) * total_e / P + n ** (1 + eps)
    for _ in range(max(1, retries)):
        groups = [[] for _ in range(P)]
        for g in guests:
            groups[rng.randrange(P)].append(g)
        if any(sum(g.e() for g in grp) > budget for grp in groups):
            continue
        slices = [[] for _ in range(P)]
        for e in host.edges:
            slices[rng.randrange(P)].append(e)
        hs = [KGraph(host.k, n, es) for es in slices]
        eps_eff = max(eps, 3.2 / math.sqrt((d / P) ** t * n))
        if all(
            is_typical(h, eps_eff, t, d / P, rng=rng, exhaustive_cap=0, samples=200).ok
            for h in hs
        ):
            return groups, hs
    raise SplitError(f"group_and_slice failed after {retries} retries")
