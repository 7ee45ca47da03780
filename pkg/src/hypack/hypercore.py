"""k-uniform hypergraph storage and elementary queries.

Invariants
- edges are sorted k-tuples of distinct vertices in [0, n); no duplicates;
- the incidence index, when built, agrees with the edge set.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from itertools import combinations

import networkx as nx

__all__ = [
    "KGraph",
    "VertexSetFamily",
    "TypicalityReport",
    "is_typical",
    "is_typical_wrt_reduced",
    "max_m_degree",
    "shadow",
    "shadow_power",
]


class KGraph:
    """Immutable k-uniform hypergraph on the dense vertex range [0, n)."""

    __slots__ = ("k", "n", "edges", "_incidence")

    def __init__(self, k: int, n: int, edges):
        if k < 2:
            raise ValueError(f"uniformity k must be >= 2, got {k}")
        if n < 0:
            raise ValueError("vertex count must be non-negative")
        clean = set()
        for e in edges:
            t = tuple(sorted(e))
            if len(t) != k or len(set(t)) != k:
                raise ValueError(f"edge {e!r} does not have {k} distinct vertices")
            if t[0] < 0 or t[-1] >= n:
                raise ValueError(f"edge {e!r} leaves the vertex range [0,{n})")
            clean.add(t)
        self.k = k
        self.n = n
        self.edges = frozenset(clean)
        self._incidence = None

    def e(self) -> int:
        return len(self.edges)

    @property
    def incidence(self) -> dict[int, tuple]:
        """Lazy vertex -> incident edges index."""
        if self._incidence is None:
            inc = {v: [] for v in range(self.n)}
            for t in self.edges:
                for v in t:
                    inc[v].append(t)
            self._incidence = {v: tuple(es) for v, es in inc.items()}
        return self._incidence

    def edges_through(self, S) -> list[tuple]:
        """All edges containing the vertex set S (S may be a single vertex)."""
        S = {S} if isinstance(S, int) else set(S)
        v0 = min(S, key=lambda v: len(self.incidence[v]))
        return [e for e in self.incidence[v0] if S.issubset(e)]

    def neighborhood(self, S) -> set[tuple]:
        """N_G(S) = { e \\ S : e an edge, S a subset of e }, as sorted tuples."""
        S = set(S)
        if not (1 <= len(S) <= self.k - 1):
            raise ValueError(f"|S| must lie in [1,{self.k - 1}], got {len(S)}")
        if any(v < 0 or v >= self.n for v in S):
            raise ValueError("S leaves the vertex range")
        return {tuple(v for v in e if v not in S) for e in self.edges_through(S)}

    def degree(self, S) -> int:
        return len(self.neighborhood(S))

    def joint_neighborhood(self, family) -> set[int]:
        """Intersection of the neighborhoods of a family of (k-1)-sets, as vertices."""
        members = family.members if isinstance(family, VertexSetFamily) else list(family)
        if not members:
            raise ValueError("family must be non-empty")
        result = None
        for S in members:
            S = set(S)
            if len(S) != self.k - 1:
                raise ValueError("family members must be (k-1)-sets")
            nb = {t[0] for t in self.neighborhood(S)}
            result = nb if result is None else result & nb
            if not result:
                return set()
        return result

    def has_edge(self, e) -> bool:
        return tuple(sorted(e)) in self.edges

    def to_json(self) -> str:
        return json.dumps(
            {"k": self.k, "n": self.n, "edges": sorted(map(list, self.edges))},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, s: str) -> "KGraph":
        d = json.loads(s)
        return cls(d["k"], d["n"], d["edges"])

    def __eq__(self, other):
        return (
            isinstance(other, KGraph)
            and (self.k, self.n, self.edges) == (other.k, other.n, other.edges)
        )

    def __hash__(self):
        return hash((self.k, self.n, self.edges))

    def __repr__(self):
        return f"KGraph(k={self.k}, n={self.n}, e={len(self.edges)})"


@dataclass(frozen=True)
class VertexSetFamily:
    """A family of (k-1)-element vertex sets with a cardinality bound t."""

    members: tuple
    t: int

    def __post_init__(self):
        if len(self.members) > self.t:
            raise ValueError(f"family has {len(self.members)} members, bound is {self.t}")
        sizes = {len(set(m)) for m in self.members}
        if len(sizes) > 1:
            raise ValueError("family members must all have the same size")

    @classmethod
    def of(cls, members, t: int) -> "VertexSetFamily":
        return cls(tuple(tuple(sorted(m)) for m in members), t)


@dataclass
class TypicalityReport:
    ok: bool
    worst_family: tuple = ()
    worst_deviation: float = 0.0
    sampled: bool = False
    families_checked: int = 0
    sample_count: int = 0
    notes: str = ""


def _check_density(d: float):
    if not (0 < d <= 1):
        raise ValueError(f"density d must lie in (0,1], got {d}")


def _family_count(num_sets: int, t: int) -> int:
    return sum(math.comb(num_sets, s) for s in range(1, t + 1))


def is_typical(
    g: KGraph,
    eps: float,
    t: int,
    d: float,
    rng: random.Random | None = None,
    exhaustive_cap: int = 10**6,
    samples: int = 10**5,
) -> TypicalityReport:
    """Check (eps,t,d)-typicality: every family of <= t distinct (k-1)-sets has
    joint neighborhood of size (1 +- eps) d^{|family|} n.

    Exhaustive when the number of candidate families is at most `exhaustive_cap`,
    otherwise uniformly sampled (`samples` draws) with the report flagged as sampled.
    """
    _check_density(d)
    if t < 1:
        raise ValueError("family bound t must be >= 1")
    rng = rng or random.Random(0)
    all_sets = list(combinations(range(g.n), g.k - 1))
    total = _family_count(len(all_sets), t)
    report = TypicalityReport(ok=True)

    def check(family) -> bool:
        size = len(g.joint_neighborhood(family))
        target = d ** len(family) * g.n
        dev = abs(size / target - 1) if target > 0 else float("inf")
        if dev > report.worst_deviation:
            report.worst_deviation = dev
            report.worst_family = tuple(family)
        return dev <= eps

    if total <= exhaustive_cap:
        for s in range(1, t + 1):
            for fam in combinations(all_sets, s):
                report.families_checked += 1
                if not check(fam):
                    report.ok = False
                    return report
    else:
        report.sampled = True
        report.sample_count = samples
        for _ in range(samples):
            s = rng.randint(1, t)
            fam = rng.sample(all_sets, s)
            report.families_checked += 1
            if not check(fam):
                report.ok = False
                return report
    return report


def is_typical_wrt_reduced(
    g: KGraph,
    parts: list[list[int]],
    reduced: KGraph,
    eps: float,
    t: int,
    d: float,
    rng: random.Random | None = None,
    exhaustive_cap: int = 10**6,
    samples: int = 10**5,
) -> TypicalityReport:
    """Multipartite typicality with respect to a reduced k-graph on part indices:
    for every part i and family of crossing (k-1)-sets drawn from reduced edges
    through i, |V_i ^ N_G(family)| = (1 +- eps) d^{|family|} |V_i|.
    """
    _check_density(d)
    rng = rng or random.Random(0)
    covered = sorted(v for p in parts for v in p)
    if covered != list(range(g.n)):
        raise ValueError("parts do not partition the vertex range of g")
    report = TypicalityReport(ok=True)

    def crossing_sets(i: int) -> list[tuple]:
        out = set()
        for r in reduced.edges:
            if i not in r:
                continue
            others = [parts[j] for j in r if j != i]
            for combo in _product_sets(others):
                out.add(tuple(sorted(combo)))
        return sorted(out)

    def check(i, fam, vi) -> bool:
        inter = g.joint_neighborhood(fam) & vi
        target = d ** len(fam) * len(vi)
        dev = abs(len(inter) / target - 1) if target > 0 else float("inf")
        if dev > report.worst_deviation:
            report.worst_deviation = dev
            report.worst_family = (i, tuple(fam))
        return dev <= eps

    for i in range(len(parts)):
        vi = set(parts[i])
        if not vi:
            continue
        sets_i = crossing_sets(i)
        if not sets_i:
            continue
        total = _family_count(len(sets_i), t)
        if total <= exhaustive_cap:
            for s in range(1, t + 1):
                for fam in combinations(sets_i, s):
                    report.families_checked += 1
                    if not check(i, fam, vi):
                        report.ok = False
                        return report
        else:
            report.sampled = True
            per_part = max(1, samples // len(parts))
            report.sample_count += per_part
            for _ in range(per_part):
                s = rng.randint(1, t)
                fam = rng.sample(sets_i, min(s, len(sets_i)))
                report.families_checked += 1
                if not check(i, fam, vi):
                    report.ok = False
                    return report
    return report


def _product_sets(pools):
    if not pools:
        yield ()
        return
    head, *rest = pools
    for v in head:
        for tail in _product_sets(rest):
            yield (v,) + tail


def max_m_degree(g: KGraph, m: int) -> int:
    """Maximum m-degree: max over m-sets S of deg(S)."""
    if not (1 <= m <= g.k - 1):
        raise ValueError(f"m must lie in [1,{g.k - 1}]")
    counts: dict[tuple, int] = {}
    for e in g.edges:
        for S in combinations(e, m):
            counts[S] = counts.get(S, 0) + 1
    return max(counts.values(), default=0)


def shadow(g: KGraph) -> nx.Graph:
    """G_*: the 2-graph obtained by replacing each hyperedge with a k-clique."""
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    for e in g.edges:
        for u, v in combinations(e, 2):
            G.add_edge(u, v)
    return G


def shadow_power(g: KGraph, m: int) -> nx.Graph:
    """The m-th power of G_* (edges between vertices at G_*-distance <= m)."""
    base = shadow(g)
    return nx.power(base, m) if m > 1 else base
