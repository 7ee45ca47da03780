"""Bipartite 2-graph regularity toolkit.

Densities, super-regularity via the 4-cycle criterion, m-factors by integral
max-flow, perfect matchings with Hall violators, and the sparse edge bound used
by packing sanity checks.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

__all__ = [
    "Bigraph",
    "RegularityWitness",
    "density",
    "c4_count",
    "certify_regular_c4",
    "is_super_regular",
    "m_factor",
    "perfect_matching",
    "MatchingFailure",
    "sparse_edge_bound_check",
]


class Bigraph:
    """Bipartite graph on sides [0, na) x [0, nb) with a boolean adjacency matrix."""

    __slots__ = ("na", "nb", "adj")

    def __init__(self, na: int, nb: int, edges=None, adj=None):
        self.na = na
        self.nb = nb
        if adj is not None:
            adj = np.asarray(adj, dtype=bool)
            if adj.shape != (na, nb):
                raise ValueError("adjacency shape mismatch")
            self.adj = adj.copy()
        else:
            self.adj = np.zeros((na, nb), dtype=bool)
            for a, b in edges or []:
                if not (0 <= a < na and 0 <= b < nb):
                    raise ValueError(f"edge ({a},{b}) leaves the sides")
                self.adj[a, b] = True

    def e(self) -> int:
        return int(self.adj.sum())

    def edges(self):
        for a, b in zip(*np.nonzero(self.adj)):
            yield int(a), int(b)

    def deg_a(self) -> np.ndarray:
        return self.adj.sum(axis=1)

    def deg_b(self) -> np.ndarray:
        return self.adj.sum(axis=0)

    def subgraph(self, A_sub, B_sub) -> "Bigraph":
        """Induced subgraph, rows/cols reindexed in the order given."""
        A_sub, B_sub = list(A_sub), list(B_sub)
        return Bigraph(len(A_sub), len(B_sub), adj=self.adj[np.ix_(A_sub, B_sub)])

    def to_json(self) -> str:
        return json.dumps(
            {"a": self.na, "b": self.nb, "edges": sorted(map(list, self.edges()))},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, s: str) -> "Bigraph":
        d = json.loads(s)
        return cls(d["a"], d["b"], edges=d["edges"])

    def __repr__(self):
        return f"Bigraph({self.na}+{self.nb}, e={self.e()})"


@dataclass
class RegularityWitness:
    ok: bool
    reason: str = ""
    vertex: tuple | None = None  # (side, index, degree) for a degree violation
    c4_excess: float = 0.0


def density(g: Bigraph, W1=None, W2=None) -> float:
    """e(W1, W2) / (|W1| |W2|); full sides by default."""
    W1 = list(range(g.na)) if W1 is None else list(W1)
    W2 = list(range(g.nb)) if W2 is None else list(W2)
    if not W1 or not W2:
        raise ValueError("density needs non-empty subsets on both sides")
    return float(g.adj[np.ix_(W1, W2)].sum()) / (len(W1) * len(W2))


def c4_count(g: Bigraph) -> int:
    """Exact number of (unordered vertex) 4-cycles: sum over B-pairs of C(codeg, 2)."""
    M = g.adj.astype(np.int64)
    C = M.T @ M  # codegrees of B-pairs
    iu = np.triu_indices(g.nb, k=1)
    cod = C[iu]
    return int((cod * (cod - 1) // 2).sum())


def certify_regular_c4(g: Bigraph, eps: float, d: float, n: int | None = None) -> bool:
    """4-cycle certificate: density (1 +- eps) d and
    C4 < (1+eps) d^4 |A|^2 |B|^2 / 4 certify (eps^{1/13}, d)-regularity.
    """
    if not (0 < d <= 1):
        raise ValueError("d must lie in (0,1]")
    n = n if n is not None else (g.na + g.nb) / 2
    if abs(g.na / n - 1) > eps or abs(g.nb / n - 1) > eps:
        raise ValueError("side sizes deviate from the declared n by more than eps")
    dens = density(g)
    if abs(dens - d) > eps * d:
        return False
    return c4_count(g) < (1 + eps) * d**4 * g.na**2 * g.nb**2 / 4


def is_super_regular(g: Bigraph, eps: float, d: float) -> RegularityWitness:
    """Degree window (1 +- eps) d |opposite side| on every vertex plus the
    4-cycle regularity certificate."""
    if not (0 < d <= 1):
        raise ValueError("d must lie in (0,1]")
    da, db = g.deg_a(), g.deg_b()
    lo_a, hi_a = (1 - eps) * d * g.nb, (1 + eps) * d * g.nb
    lo_b, hi_b = (1 - eps) * d * g.na, (1 + eps) * d * g.na
    bad_a = np.nonzero((da < lo_a) | (da > hi_a))[0]
    if bad_a.size:
        v = int(bad_a[0])
        return RegularityWitness(False, "degree", ("A", v, int(da[v])))
    bad_b = np.nonzero((db < lo_b) | (db > hi_b))[0]
    if bad_b.size:
        v = int(bad_b[0])
        return RegularityWitness(False, "degree", ("B", v, int(db[v])))
    bound = (1 + eps) * d**4 * g.na**2 * g.nb**2 / 4
    c4 = c4_count(g)
    if c4 >= bound:
        return RegularityWitness(False, "c4", c4_excess=c4 / bound)
    return RegularityWitness(True)


def m_factor(g: Bigraph, m: int) -> Bigraph | None:
    """Spanning m-regular subgraph via integral max-flow, or None if none exists.

    Source -> A arcs and B -> sink arcs have capacity m, A -> B arcs capacity 1;
    a flow of value m*|A| is exactly an m-factor.
    """
    if g.na != g.nb:
        raise ValueError("m_factor needs balanced sides")
    if m == 0:
        return Bigraph(g.na, g.nb)
    n = g.na
    if n == 0 or m > min(int(g.deg_a().min()), int(g.deg_b().min())):
        return None
    src, snk = 2 * n, 2 * n + 1
    rows, cols, caps = [], [], []
    for a in range(n):
        rows.append(src); cols.append(a); caps.append(m)
        rows.append(n + a); cols.append(snk); caps.append(m)
    ea, eb = np.nonzero(g.adj)
    for a, b in zip(ea, eb):
        rows.append(int(a)); cols.append(n + int(b)); caps.append(1)
    graph = csr_matrix((caps, (rows, cols)), shape=(2 * n + 2, 2 * n + 2))
    res = maximum_flow(graph, src, snk)
    if res.flow_value < m * n:
        return None
    flow = res.flow.tocoo()
    out = Bigraph(n, n)
    for u, v, f in zip(flow.row, flow.col, flow.data):
        if f > 0 and u < n and n <= v < 2 * n:
            out.adj[u, v - n] = True
    return out


@dataclass
class MatchingFailure:
    violator: set  # Hall violator S on the A side: |N(S)| < |S|


def perfect_matching(g: Bigraph, rng: random.Random | None = None):
    """Perfect matching by augmenting paths with rng-shuffled scan order.

    Returns a dict a -> b, or a MatchingFailure carrying a Hall violator.
    """
    if g.na != g.nb:
        raise ValueError("perfect_matching needs balanced sides")
    rng = rng or random.Random(0)
    nbrs = {a: list(np.nonzero(g.adj[a])[0]) for a in range(g.na)}
    for a in nbrs:
        rng.shuffle(nbrs[a])
    match_a: dict[int, int] = {}
    match_b: dict[int, int] = {}
    order = list(range(g.na))
    rng.shuffle(order)
    for a0 in order:
        # BFS layer structure from a0 over alternating paths
        parent = {a0: None}
        frontier = deque([a0])
        found = None
        seen_b = set()
        while frontier and found is None:
            a = frontier.popleft()
            for b in nbrs[a]:
                if b in seen_b:
                    continue
                seen_b.add(b)
                if b not in match_b:
                    found = (a, b)
                    break
                nxt = match_b[b]
                if nxt not in parent:
                    parent[nxt] = (a, b)
                    frontier.append(nxt)
        if found is None:
            reachable_a = set(parent)
            return MatchingFailure(violator=reachable_a)
        a, b = found
        while True:
            prev = parent[a]
            match_a[a], match_b[b] = b, a
            if prev is None:
                break
            a, b = prev
    return match_a


def sparse_edge_bound_check(
    g: Bigraph, X, Y, eps: float, d: float, n: int | None = None,
    enforce_window: bool = True,
) -> bool:
    """Diagnostic for the sparse edge bound e(X,Y) <= eps^{1/3} d n max(|X|,|Y|).

    Raises on the size preconditions n^{3/4+3eps} <= |X|,|Y| <= eps n rather
    than returning False: a precondition violation is not a counterexample.
    The window is non-empty only for astronomically large n; packing sanity
    checks evaluate the inequality itself with enforce_window=False.
    """
    X, Y = list(X), list(Y)
    n = n if n is not None else g.na
    if enforce_window:
        lo = n ** (0.75 + 3 * eps)
        for name, S in (("X", X), ("Y", Y)):
            if not (lo <= len(S) <= eps * n):
                raise ValueError(
                    f"{name} size {len(S)} outside [{lo:.1f}, {eps * n:.1f}] precondition"
                )
    if not X or not Y:
        return True
    count = int(g.adj[np.ix_(X, Y)].sum())
    return count <= eps ** (1 / 3) * d * n * max(len(X), len(Y))
