"""Weight-controlled pseudorandom hypergraph matching engine.

Random-greedy with verify-and-restart: repeatedly pick a surviving edge
uniformly at random, add it to the matching, delete all intersecting edges;
then check every tuple-weight ratio against the pseudorandom window and retry
with a fresh seed on violation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations

__all__ = [
    "MatchHypergraph",
    "TupleWeight",
    "MatchingResult",
    "MatchingError",
    "degree_stats",
    "pseudorandom_matching",
    "brute_force_matchings",
]


class MatchHypergraph:
    """Hypergraph for matching: edges are hashable frozensets of vertices."""

    def __init__(self, edges):
        self.edges = [frozenset(e) for e in edges]
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edges")
        self.incidence: dict = {}
        for idx, e in enumerate(self.edges):
            for v in e:
                self.incidence.setdefault(v, []).append(idx)

    def e(self) -> int:
        return len(self.edges)


def degree_stats(h: MatchHypergraph) -> tuple[int, int, int]:
    """(max vertex degree, max codegree, edge count), all exact."""
    delta = max((len(idxs) for idxs in h.incidence.values()), default=0)
    pair_counts: dict = {}
    for e in h.edges:
        for p in combinations(sorted(e), 2):
            pair_counts[p] = pair_counts.get(p, 0) + 1
    delta2 = max(pair_counts.values(), default=0)
    return delta, delta2, len(h.edges)


class TupleWeight:
    """Sparse ell-tuple weight function on edges (keyed by frozensets of edges)."""

    def __init__(self, ell: int, values: dict, clean: bool = True, name: str = ""):
        self.ell = ell
        self.name = name
        self.clean = clean
        self.values: dict = {}
        for key, w in values.items():
            if w < 0:
                raise ValueError("weights must be non-negative")
            edges = frozenset(frozenset(e) for e in key)
            if len(edges) != ell:
                raise ValueError(f"key {key!r} is not an {ell}-set of edges")
            if clean and ell > 1 and not _is_matching(edges):
                raise ValueError("clean weight supported on a non-matching tuple")
            self.values[edges] = self.values.get(edges, 0.0) + w

    @classmethod
    def counting(cls, edges, name: str = "count") -> "TupleWeight":
        return cls(1, {frozenset([frozenset(e)]): 1.0 for e in edges}, name=name)

    def total(self) -> float:
        return sum(self.values.values())

    def norm(self, m: int) -> float:
        """||w||_m: max over m-sets T of the weight of supersets of T."""
        if not (1 <= m <= self.ell):
            raise ValueError("m out of range")
        agg: dict = {}
        for key, w in self.values.items():
            for sub in combinations(sorted(key, key=_edge_key), m):
                fs = frozenset(sub)
                agg[fs] = agg.get(fs, 0.0) + w
        return max(agg.values(), default=0.0)

    def of_matching(self, matching) -> float:
        """Total weight of ell-subsets of the matching (support-sparse evaluation)."""
        mset = {frozenset(e) for e in matching}
        return sum(w for key, w in self.values.items() if key <= mset)


def _edge_key(e: frozenset):
    return tuple(sorted(e, key=repr))


def _is_matching(edges) -> bool:
    seen = set()
    for e in edges:
        if seen & e:
            return False
        seen |= e
    return True


@dataclass
class MatchingResult:
    matching: list
    ratios: dict = field(default_factory=dict)  # weight name -> achieved/target
    seed: int = 0
    restarts: int = 0


class MatchingError(RuntimeError):
    def __init__(self, msg, worst=None):
        super().__init__(msg)
        self.worst = worst


def _random_greedy(h: MatchHypergraph, rng: random.Random) -> list:
    """Uniform random greedy via a shuffled tombstoned edge array."""
    order = list(range(len(h.edges)))
    rng.shuffle(order)
    dead = bytearray(len(h.edges))
    matching = []
    for idx in order:
        if dead[idx]:
            continue
        e = h.edges[idx]
        matching.append(e)
        for v in e:
            for j in h.incidence[v]:
                dead[j] = 1
    return matching


def pseudorandom_matching(
    h: MatchHypergraph,
    weights: list[TupleWeight],
    tol: float = 0.25,
    rng: random.Random | None = None,
    restarts: int = 20,
    slack: float | None = None,
    codegree_ratio: float = 0.9,
) -> MatchingResult:
    """Random-greedy matching whose weight totals hit (1 +- tol) w(E)/Delta^ell
    (plus an additive `slack` for small-total weights).

    Requires the codegree to sit substantially below the degree
    (Delta_2 <= codegree_ratio * Delta, checked when Delta > 1); every weight
    must be clean. Restarts with fresh sub-seeds up to the budget; raises
    MatchingError carrying the worst-violating weight if exhausted.
    """
    rng = rng or random.Random(0)
    delta, delta2, ne = degree_stats(h)
    if delta > 1 and delta2 > codegree_ratio * delta:
        raise MatchingError(f"codegree {delta2} too close to degree {delta}")
    for w in weights:
        if not w.clean:
            raise MatchingError(f"weight {w.name!r} is not clean")
    if slack is None:
        slack = max(1.0, ne ** 0.25)
    d_eff = max(delta, 1)

    worst = None
    last = None
    for attempt in range(max(1, restarts)):
        seed = rng.getrandbits(32)
        matching = _random_greedy(h, random.Random(seed))
        ratios = {}
        ok = True
        worst_here = None
        for w in weights:
            target = w.total() / d_eff**w.ell
            got = w.of_matching(matching)
            ratios[w.name or f"w{id(w)}"] = (got, target)
            if abs(got - target) > tol * target + slack:
                ok = False
                dev = abs(got - target) - tol * target
                if worst_here is None or dev > worst_here[0]:
                    worst_here = (dev, w.name, got, target)
        last = MatchingResult(matching, ratios, seed=seed, restarts=attempt)
        if ok:
            return last
        if worst is None or worst_here[0] > worst[0]:
            worst = worst_here
    raise MatchingError(
        f"restart budget exhausted; worst weight {worst[1]!r}: got {worst[2]:.3f}, target {worst[3]:.3f}",
        worst=worst,
    )


def brute_force_matchings(h: MatchHypergraph, guard: int = 22) -> list[list]:
    """All maximal matchings, exhaustively (oracle for desk-scale verification)."""
    if len(h.edges) > guard:
        raise ValueError(f"instance has {len(h.edges)} edges, guard is {guard}")
    out = []
    edges = h.edges

    def extend(matching, used, start):
        extended = False
        for idx in range(start, len(edges)):
            e = edges[idx]
            if used & e:
                continue
            extend(matching + [e], used | e, idx + 1)
            extended = True
        if not extended:
            # maximal within edges[start:]; verify global maximality
            if all(used & e for e in edges if e not in matching):
                out.append(matching)

    extend([], frozenset(), 0)
    # dedupe (different orderings reach the same set only once given index order)
    return out
