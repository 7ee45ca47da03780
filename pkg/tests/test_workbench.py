import json
import math
import os
import random
from itertools import combinations

import pytest

from hypack.hypercore import KGraph, max_m_degree
from hypack.instances import SplitError
from hypack.packer import ParameterLadder
from hypack.workbench import (
    ExperimentConfig,
    gen_binomial_kgraph,
    gen_complete_kgraph,
    gen_ktree,
    gen_multipartite_host,
    gen_sphere_triangulation,
    gen_tight_cycle_factor,
    run_experiment,
)


def test_complete_kgraph_counts():
    g = gen_complete_kgraph(5, 3)
    assert g.e() == 10
    assert all(len(g.neighborhood(set(e[:2]))) == 3 for e in g.edges)
    # every (k-1)-set has degree n-k+1
    for S in combinations(range(5), 2):
        assert g.degree(S) == 3


def test_complete_oberwolfach_divisibility():
    # k | C(n-1, k-1) makes the factor count integral
    n, k = 9, 3
    assert math.comb(n - 1, k - 1) % k is not None
    g = gen_complete_kgraph(n, k)
    assert g.e() == math.comb(n, k)
    factors = math.comb(n - 1, k - 1) / k
    assert g.e() / n == pytest.approx(factors)


def test_binomial_kgraph_density_and_extremes():
    rng = random.Random(1)
    g = gen_binomial_kgraph(20, 3, 1.0, rng)
    assert g.e() == math.comb(20, 3)
    g2 = gen_binomial_kgraph(30, 3, 0.5, rng, certify=False)
    mean = 0.5 * math.comb(30, 3)
    assert abs(g2.e() - mean) < 4 * math.sqrt(mean)
    with pytest.raises(ValueError):
        gen_binomial_kgraph(10, 3, 0.0, rng)


def test_tight_cycle_factor_basic():
    g = gen_tight_cycle_factor(7, 3, [7])
    assert g.e() == 7
    for v in range(7):
        assert sum(1 for e in g.edges if v in e) == 3
    g2 = gen_tight_cycle_factor(10, 3, [5, 5])
    assert g2.e() == 10
    with pytest.raises(ValueError):
        gen_tight_cycle_factor(10, 3, [6, 5])
    with pytest.raises(ValueError):
        gen_tight_cycle_factor(7, 3, [3, 4])  # 3 below the default floor


def test_tight_cycle_consecutive_window_structure():
    g = gen_tight_cycle_factor(8, 3, [8])
    # along the cyclic order, each consecutive (k-1)-window lies in exactly 2 edges
    for s in range(8):
        window = {s, (s + 1) % 8}
        assert g.degree(window) == 2
    assert max_m_degree(g, 1) == 3


def test_ktree_growth_invariants():
    rng = random.Random(3)
    for edges in (1, 5, 12):
        g = gen_ktree(edges, 3, 4, rng)
        assert g.e() == edges
        assert g.n == edges + 3 - 1
        assert max_m_degree(g, 1) <= 4
    with pytest.raises(ValueError):
        gen_ktree(3, 3, 1, rng)


def test_ktree_degree_ceiling_infeasible():
    rng = random.Random(4)
    with pytest.raises(SplitError):
        # max_degree 2 and k=3: growth locks quickly
        gen_ktree(50, 3, 2, rng)


def test_ktree_connected_in_shadow():
    import networkx as nx

    from hypack.hypercore import shadow

    rng = random.Random(5)
    g, parents = gen_ktree(10, 3, 4, rng, return_certificate=True)
    assert nx.is_connected(shadow(g))
    # certificate: every added vertex's parent edge contains it
    for v, e in parents.items():
        if e is not None:
            assert v in e and g.has_edge(e)


def test_sphere_triangulation_levels():
    g0 = gen_sphere_triangulation(0)
    assert g0.n == 6 and g0.e() == 8
    assert all(sum(1 for f in g0.edges if v in f) == 4 for v in range(6))
    g1 = gen_sphere_triangulation(1)
    assert g1.n == 18 and g1.e() == 32
    g2 = gen_sphere_triangulation(2)
    assert g2.n == 66 and g2.e() == 128
    ico = gen_sphere_triangulation(0, "icosahedron")
    assert ico.n == 12 and ico.e() == 20
    assert all(sum(1 for f in ico.edges if v in f) == 5 for v in range(12))


def test_sphere_triangulation_euler_via_shadow():
    from hypack.hypercore import shadow

    for level in (0, 1, 2):
        g = gen_sphere_triangulation(level)
        sh = shadow(g)
        assert g.n - sh.number_of_edges() + g.e() == 2


def test_multipartite_host_generator():
    rng = random.Random(7)
    red = KGraph(3, 3, [(0, 1, 2)])
    host, parts = gen_multipartite_host(8, 3, 3, red, 1.0, rng)
    assert host.e() == 8**3
    assert [len(p) for p in parts] == [8, 8, 8]
    host2, _ = gen_multipartite_host(10, 3, 3, red, 0.7, rng, eps=0.9, t=1)
    assert 0.4 * 1000 < host2.e() < 0.95 * 1000


def _feasible_cfg(seed=0, out=None):
    return ExperimentConfig(
        host={"kind": "binomial", "n": 60, "k": 3, "d": 1.0, "certify": False},
        guests={"kind": "matchings", "count": 2},
        ladder=ParameterLadder(
            alpha=0.3, gamma=0.65, mu=0.12, d=1.0, eps0=0.4, eps_T=0.6,
            match_tol=0.6, matching_restarts=4, completion_retries=20,
            sample_checks=4, t=1,
        ),
        seed=seed,
        refine_classes=3,
        set_tester_count=3,
        vertex_tester_count=3,
        out_dir=out,
    )


def test_run_experiment_feasible_matchings(tmp_path):
    cfg = _feasible_cfg(out=str(tmp_path))
    rep = run_experiment(cfg)
    assert rep["success"], rep.get("error")
    assert rep["coverage"] > 0
    assert os.path.exists(tmp_path / "report.json")
    with open(tmp_path / "report.json") as fh:
        disk = json.load(fh)
    assert disk["seed"] == cfg.seed
    assert "ladder" in disk and "content_hash" in disk


def test_run_experiment_deterministic():
    r1 = run_experiment(_feasible_cfg(seed=5))
    r2 = run_experiment(_feasible_cfg(seed=5))
    assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)


def test_run_experiment_empty_guests_trivial():
    cfg = _feasible_cfg()
    cfg.guests = {"kind": "matchings", "count": 0}
    rep = run_experiment(cfg)
    assert rep["success"] and rep["coverage"] == 0.0


def test_run_experiment_budget_violation():
    cfg = _feasible_cfg()
    cfg.guests = {"kind": "matchings", "count": 500}
    rep = run_experiment(cfg)
    assert not rep["success"] and "error" in rep


def test_cli_round_trip(tmp_path):
    from hypack.cli import main

    cfg = {
        "host": {"kind": "binomial", "n": 24, "k": 3, "d": 1.0, "certify": False},
        "guests": {"kind": "matchings", "count": 1},
        "ladder": {
            "alpha": 0.3, "gamma": 0.65, "mu": 0.12, "d": 1.0, "eps0": 0.4,
            "eps_T": 0.6, "match_tol": 0.6, "completion_retries": 20, "t": 1,
            "sample_checks": 2,
        },
        "refine_classes": 3,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["gen-host", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "host.json").exists()
    assert main(["gen-guests", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
    code = main(["pack", "--config", str(cfg_path), "--seed", "3", "--out", str(tmp_path)])
    assert code == 0
    assert main(["report", "--out", str(tmp_path)]) == 0
