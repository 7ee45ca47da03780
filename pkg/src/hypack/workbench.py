"""Instance generators, the experiment pipeline, and report emission."""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
import tempfile
from dataclasses import dataclass, field
from itertools import combinations

from .hypercore import KGraph, is_typical, is_typical_wrt_reduced
from .instances import (
    BlowupInstance,
    RefinementError,
    SplitError,
    WeightFn,
    group_and_slice,
    refine_partitions_single,
    validate_blowup,
)
from .packer import (
    AugmentationError,
    CompletionError,
    ParameterLadder,
    RoundError,
    complete_packing,
    evaluate_tester_suite,
    run_iterative,
    verify_packing,
)
from .patterns import SetTester, VertexTester

__all__ = [
    "gen_complete_kgraph",
    "gen_binomial_kgraph",
    "gen_tight_cycle_factor",
    "gen_ktree",
    "gen_sphere_triangulation",
    "gen_multipartite_host",
    "ExperimentConfig",
    "run_experiment",
    "TOLERANCE_PROFILES",
]


def gen_complete_kgraph(n: int, k: int) -> KGraph:
    if n < k:
        raise ValueError("need n >= k")
    return KGraph(k, n, combinations(range(n), k))


def gen_binomial_kgraph(
    n: int,
    k: int,
    d: float,
    rng: random.Random,
    eps: float | None = None,
    t: int = 2,
    retries: int = 5,
    certify: bool = True,
) -> KGraph:
    """Each k-set kept with probability d; regenerated until the (sampled)
    typicality self-check passes.

    The default tolerance tracks the binomial noise floor ~1/sqrt(d^t n): the
    self-check guards against pathological hosts, not sampling variance.
    """
    if not (0 < d <= 1):
        raise ValueError("d must lie in (0,1]")
    if eps is None:
        eps = max(0.2, 3.2 / math.sqrt(d**t * n))
    for _ in range(max(1, retries)):
        edges = [e for e in combinations(range(n), k) if rng.random() < d]
        g = KGraph(k, n, edges)
        if not certify:
            return g
        if is_typical(g, eps, t, d, rng=rng, exhaustive_cap=0, samples=300).ok:
            return g
    raise SplitError(f"binomial host failed typicality at d={d} after {retries} tries")


def gen_tight_cycle_factor(n: int, k: int, lengths, min_len: int | None = None) -> KGraph:
    """Disjoint union of tight cycles with the given lengths (sum = n): every
    window of k cyclically consecutive vertices is an edge."""
    floor = min_len if min_len is not None else k + 1
    lengths = list(lengths)
    if sum(lengths) != n:
        raise ValueError("cycle lengths must sum to n")
    if any(m < floor for m in lengths):
        raise ValueError(f"cycle length below the floor {floor}")
    edges = []
    base = 0
    for m in lengths:
        for s in range(m):
            edges.append(tuple(sorted(base + (s + j) % m for j in range(k))))
        base += m
    return KGraph(k, n, set(edges))


def gen_ktree(
    n_edges: int, k: int, max_degree: int, rng: random.Random,
    return_certificate: bool = False,
):
    """Recursive k-tree: start with one edge, repeatedly attach a new vertex to
    a uniformly chosen (k-1)-set inside an existing edge whose vertices all
    stay within the degree bound.

    With return_certificate=True also returns the growth certificate (parent
    edge per added vertex)."""
    if max_degree < 2:
        raise ValueError("max_degree must be >= 2")
    if n_edges < 1:
        raise ValueError("need at least one edge")
    edges = [tuple(range(k))]
    deg = {v: 1 for v in range(k)}
    parents = {v: None for v in range(k)}
    nxt = k
    while len(edges) < n_edges:
        anchors = set()
        for e in edges:
            for S in combinations(e, k - 1):
                if all(deg[v] < max_degree for v in S):
                    anchors.add(S)
        if not anchors:
            raise SplitError("degree ceiling makes k-tree growth infeasible")
        S = rng.choice(sorted(anchors))
        e_new = tuple(sorted(S + (nxt,)))
        edges.append(e_new)
        for v in S:
            deg[v] += 1
        deg[nxt] = 1
        parents[nxt] = e_new
        nxt += 1
    g = KGraph(k, nxt, edges)
    return (g, parents) if return_certificate else g


_SEEDS = {
    "octahedron": (
        6,
        [
            (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 2, 5),
            (1, 2, 3), (1, 3, 4), (1, 4, 5), (1, 2, 5),
        ],
    ),
    "icosahedron": (
        12,
        [
            (0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 1, 5),
            (1, 2, 7), (2, 3, 8), (3, 4, 9), (4, 5, 10), (1, 5, 6),
            (1, 6, 7), (2, 7, 8), (3, 8, 9), (4, 9, 10), (5, 6, 10),
            (6, 7, 11), (7, 8, 11), (8, 9, 11), (9, 10, 11), (6, 10, 11),
        ],
    ),
}


def gen_sphere_triangulation(level: int, seed_shape: str = "octahedron") -> KGraph:
    """Triangulation of the 2-sphere as a 3-graph of faces: the seed polyhedron
    refined `level` times by 1 -> 4 triangle subdivision. Euler characteristic
    and the face-degree bound (<= 6) are enforced."""
    if level < 0:
        raise ValueError("level must be >= 0")
    n, faces = _SEEDS[seed_shape]
    faces = [tuple(f) for f in faces]
    for _ in range(level):
        mid: dict = {}

        def midpoint(a, b):
            nonlocal n
            key = (min(a, b), max(a, b))
            if key not in mid:
                mid[key] = n
                n += 1
            return mid[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, ab, bc), (c, bc, ca), (ab, bc, ca)]
        faces = new_faces
    edges2 = {frozenset(p) for f in faces for p in combinations(f, 2)}
    euler = n - len(edges2) + len(faces)
    if euler != 2:
        raise AssertionError(f"Euler characteristic {euler} != 2")
    deg: dict = {}
    for f in faces:
        for v in f:
            deg[v] = deg.get(v, 0) + 1
    if max(deg.values()) > 6:
        raise AssertionError("face degree exceeds 6")
    return KGraph(3, n, faces)


def gen_multipartite_host(
    n: int,
    k: int,
    r: int,
    reduced: KGraph,
    d: float,
    rng: random.Random,
    eps: float = 0.2,
    t: int = 2,
    retries: int = 5,
):
    """Host on r parts of size n: crossing k-sets of each reduced edge kept
    with probability d; self-certifies reduced typicality. Returns
    (host, host_parts)."""
    parts = [list(range(i * n, (i + 1) * n)) for i in range(r)]
    for _ in range(max(1, retries)):
        edges = []
        for re in reduced.edges:
            pools = [parts[j] for j in re]
            for combo in _iter_product(pools):
                if rng.random() < d:
                    edges.append(tuple(sorted(combo)))
        host = KGraph(k, n * r, edges)
        rep = is_typical_wrt_reduced(
            host, parts, reduced, eps, t, d, rng=rng, exhaustive_cap=0, samples=300
        )
        if rep.ok:
            return host, parts
    raise SplitError("multipartite host failed reduced typicality")


def _iter_product(pools):
    if not pools:
        yield ()
        return
    head, *rest = pools
    for v in head:
        for tail in _iter_product(rest):
            yield (v,) + tail


TOLERANCE_PROFILES = {
    "default": {},
    "lenient": {"eps0": 0.25, "eps_T": 0.6, "match_tol": 0.5, "round_retries": 5},
    "strict": {"strict": True},
}


@dataclass
class ExperimentConfig:
    host: dict  # {"kind": "complete"|"binomial"|"multipartite", ...}
    guests: dict  # {"kind": "tight_cycle_factors"|"ktrees"|"triangulations"|"matchings", ...}
    ladder: ParameterLadder = field(default_factory=ParameterLadder)
    seed: int = 0
    refine_classes: int = 5
    slices: int = 1
    set_tester_count: int = 0
    vertex_tester_count: int = 0
    out_dir: str | None = None
    csv: bool = False

    def validate(self, host: KGraph, guests: list[KGraph]):
        budget = (1 - self.ladder.alpha) * host.e()
        total = sum(g.e() for g in guests)
        if total > budget:
            raise ValueError(
                f"guest edges {total} exceed (1-alpha) host budget {budget:.0f}"
            )


def _build_host(cfg: ExperimentConfig, rng: random.Random) -> KGraph:
    spec = cfg.host
    kind = spec["kind"]
    if kind == "complete":
        return gen_complete_kgraph(spec["n"], spec["k"])
    if kind == "binomial":
        return gen_binomial_kgraph(
            spec["n"], spec["k"], spec["d"], rng,
            retries=spec.get("retries", 5), certify=spec.get("certify", True),
        )
    raise ValueError(f"unknown host kind {kind!r}")


def _pad_to_order(g: KGraph, n: int) -> KGraph:
    if g.n > n:
        raise ValueError("guest larger than host")
    return KGraph(g.k, n, g.edges) if g.n < n else g


def _build_guests(cfg: ExperimentConfig, host: KGraph, rng: random.Random) -> list[KGraph]:
    spec = cfg.guests
    kind = spec["kind"]
    count = spec.get("count", 1)
    n, k = host.n, host.k
    out = []
    if kind == "tight_cycle_factors":
        floor = spec.get("min_len", k + 1)
        for _ in range(count):
            lengths = []
            left = n
            while left > 0:
                if left < 2 * floor:
                    lengths.append(left)
                    break
                m = rng.randint(floor, min(left - floor, max(floor, n // 2)))
                lengths.append(m)
                left -= m
            out.append(gen_tight_cycle_factor(n, k, lengths, min_len=floor))
    elif kind == "matchings":
        for _ in range(count):
            verts = list(range(n))
            rng.shuffle(verts)
            edges = [tuple(sorted(verts[i : i + k])) for i in range(0, n - n % k, k)]
            keep = spec.get("edges", len(edges))
            out.append(KGraph(k, n, edges[:keep]))
    elif kind == "ktrees":
        for _ in range(count):
            g = gen_ktree(spec["edges"], k, spec.get("max_degree", 3), rng)
            out.append(_pad_to_order(g, n))
    elif kind == "triangulations":
        base = gen_sphere_triangulation(spec.get("level", 1), spec.get("shape", "octahedron"))
        for _ in range(count):
            out.append(_pad_to_order(base, n))
    else:
        raise ValueError(f"unknown guest kind {kind!r}")
    return out


def _random_testers(cfg, host, guests, classes_b, rng):
    n = host.n
    sts, vts = [], []
    if not guests:
        return sts, vts
    for _ in range(cfg.set_tester_count):
        m = rng.randint(1, min(2, len(guests)))
        gis = rng.sample(range(len(guests)), m)
        W = frozenset(rng.sample(range(n), max(n // 4, 1)))
        Ys = tuple(
            (gi, frozenset(rng.sample(range(guests[gi].n), max(n // 4, 1)))) for gi in gis
        )
        sts.append(SetTester(W=W, Ys=Ys))
    for _ in range(cfg.vertex_tester_count):
        gi = rng.randrange(len(guests))
        g = guests[gi]
        size = rng.randint(1, 2)
        if size == 1 or not g.edges:
            xs = rng.sample(range(g.n), min(40, g.n))
            omega = {(gi, (x,)): rng.uniform(0, 4) for x in xs}
            c = rng.randrange(n)
            vts.append(VertexTester(I=(0,), centres={0: c}, omega=omega, ell=4))
        else:
            pairs = set()
            for e in rng.sample(sorted(g.edges), min(40, g.e())):
                a, b = sorted(rng.sample(list(e), 2))
                pairs.add((a, b))
            omega = {(gi, p): rng.uniform(0, 4) for p in pairs}
            cs = sorted(rng.sample(range(n), 2))
            vts.append(
                VertexTester(I=(0, 1), centres={0: cs[0], 1: cs[1]}, omega=omega, ell=4)
            )
    return sts, vts


def _blowup_from_refined(host, guests, refined, B, k, rng) -> BlowupInstance:
    n = host.n
    if n % B != 0:
        raise ValueError(f"refine_classes {B} must divide the host order {n}")
    size = n // B
    # align class sizes across guests (all orders equal, B | n: already exact)
    verts = list(range(n))
    rng.shuffle(verts)
    host_parts = [sorted(verts[j * size : (j + 1) * size]) for j in range(B)]
    guest_parts = refined
    cls_edges = set()
    for gi, g in enumerate(guests):
        cof = {v: j for j, cls in enumerate(guest_parts[gi]) for v in cls}
        for e in g.edges:
            cls_edges.add(tuple(sorted(cof[u] for u in e)))
    reduced = KGraph(k, B, cls_edges) if cls_edges else KGraph(k, B, [])
    return BlowupInstance(
        guests=guests, host=host, reduced=reduced,
        guest_parts=guest_parts, host_parts=host_parts, n=size,
    )


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Build host and guests, route through the pipeline, and emit the report.

    Non-multipartite route: group/slice, refine each guest's vertex set,
    assemble one blow-up instance per slice, then run the iterative packer and
    the completion per slice. Reports are deterministic for a fixed config and
    seed.
    """
    rng = random.Random(cfg.seed)
    host = _build_host(cfg, rng)
    guests = _build_guests(cfg, host, rng)
    cfg.validate(host, guests)
    ladder = cfg.ladder
    report: dict = {
        "seed": cfg.seed,
        "params": {"n": host.n, "k": host.k, "guests": len(guests)},
        "ladder": ladder.as_dict(),
        "content_hash": _content_hash(host, guests),
        "stages": [],
        "success": False,
        "retries": 0,
        "coverage": 0.0,
    }
    try:
        groups, slices = group_and_slice(
            guests, host, cfg.slices, rng, ladder.d, retries=ladder.split_retries
        )
        report["stages"].append("group_and_slice")
        all_phis = [dict() for _ in guests]
        index_of = {id(g): gi for gi, g in enumerate(guests)}
        coverage_edges = 0
        leftover_per_cluster: dict = {}
        sq_failed = 0
        sq_total = 0
        retries = 0
        for p, (grp, hsl) in enumerate(zip(groups, slices)):
            if not grp:
                continue
            B = cfg.refine_classes
            refined, _rep = refine_partitions_single(grp, 1.0 / B, rng=rng)
            blowup = _blowup_from_refined(hsl, grp, refined, B, host.k, rng)
            bad = validate_blowup(blowup)
            if bad:
                raise RoundError(f"slice {p}: invalid blow-up {bad[:2]}")
            state = run_iterative(blowup, ladder, rng)
            report["stages"].append(f"iterative[{p}]")
            for rec in state.rounds:
                retries += rec.retries
                sq_total += len(rec.checks)
                sq_failed += len(rec.failed_checks())
                for gi_local, left in rec.leftover.items():
                    key = f"{p}:{rec.cluster}"
                    leftover_per_cluster[key] = max(leftover_per_cluster.get(key, 0), left)
            comp = complete_packing(state, rng)
            report["stages"].append(f"completion[{p}]")
            for c in comp.checks:
                sq_total += 1
                sq_failed += 0 if c.ok else 1
            vrep = verify_packing(blowup, state.phi)
            if vrep.violations:
                raise RoundError(f"slice {p}: audit violations {vrep.violations[:3]}")
            coverage_edges += sum(g.e() for g in grp)
            for gi_local, g in enumerate(grp):
                all_phis[index_of[id(g)]] = state.phi[gi_local]
        report["retries"] = retries
        report["sq_assertions"] = {"checked": sq_total, "failed": sq_failed}
        report["leftover_per_cluster"] = leftover_per_cluster
        report["coverage"] = coverage_edges / host.e() if host.e() else 0.0
        sts, vts = _random_testers(cfg, host, guests, cfg.refine_classes, rng)
        tester_results = evaluate_tester_suite(sts, vts, all_phis, host.n, ladder.alpha)
        report["tester_results"] = tester_results
        report["success"] = True
        report["phis"] = [
            {str(x): v for x, v in sorted(phi.items())} for phi in all_phis
        ]
    except (
        RoundError, CompletionError, AugmentationError,
        RefinementError, SplitError, ValueError,
    ) as err:
        report["error"] = f"{type(err).__name__}: {err}"
    if cfg.out_dir:
        _emit(report, cfg)
    return report


def _content_hash(host: KGraph, guests: list[KGraph]) -> str:
    h = hashlib.sha256()
    h.update(host.to_json().encode())
    for g in guests:
        h.update(g.to_json().encode())
    return h.hexdigest()[:16]


def _emit(report: dict, cfg: ExperimentConfig):
    os.makedirs(cfg.out_dir, exist_ok=True)
    payload = json.dumps(report, sort_keys=True, indent=1)
    fd, tmp = tempfile.mkstemp(dir=cfg.out_dir, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(payload)
    os.replace(tmp, os.path.join(cfg.out_dir, "report.json"))
    if cfg.csv:
        dev = 0.0
        for t in report.get("tester_results", []):
            if t["want"]:
                dev = max(dev, abs(t["got"] - t["want"]) / max(abs(t["want"]), 1.0))
        line = ",".join(
            str(v)
            for v in (
                report["seed"], report["params"]["n"], report["params"]["k"],
                report["params"]["guests"], f"{report['coverage']:.4f}",
                report["retries"], f"{dev:.4f}", "",
            )
        )
        with open(os.path.join(cfg.out_dir, "summary.csv"), "a") as fh:
            if fh.tell() == 0:
                fh.write("seed,n,k,guests,coverage,retries,max_tester_deviation,runtime_ms\n")
            fh.write(line + "\n")
