"""Command-line front end: gen-host, gen-guests, pack, verify, report."""

from __future__ import annotations

import argparse
import json
import os
import random
import sys

from .instances import BlowupInstance
from .packer import ParameterLadder, verify_packing
from .workbench import (
    ExperimentConfig,
    TOLERANCE_PROFILES,
    _build_guests,
    _build_host,
    run_experiment,
)


def _load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _make_cfg(raw: dict, seed: int | None, out: str | None, profile: str | None) -> ExperimentConfig:
    ladder_kw = dict(raw.get("ladder", {}))
    if profile:
        ladder_kw.update(TOLERANCE_PROFILES[profile])
    cfg = ExperimentConfig(
        host=raw["host"],
        guests=raw["guests"],
        ladder=ParameterLadder(**ladder_kw),
        seed=raw.get("seed", 0) if seed is None else seed,
        refine_classes=raw.get("refine_classes", 5),
        slices=raw.get("slices", 1),
        set_tester_count=raw.get("set_tester_count", 0),
        vertex_tester_count=raw.get("vertex_tester_count", 0),
        out_dir=out or raw.get("out_dir"),
        csv=raw.get("csv", False),
    )
    return cfg


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hypack")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("gen-host", "gen-guests", "pack", "verify", "report"):
        p = sub.add_parser(verb)
        p.add_argument("--config", required=verb not in ("report",))
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--tolerance-profile", default=None, choices=sorted(TOLERANCE_PROFILES))
    args = ap.parse_args(argv)

    if args.verb == "report":
        path = os.path.join(args.out or ".", "report.json")
        with open(path) as fh:
            rep = json.load(fh)
        print(json.dumps({k: rep[k] for k in ("seed", "coverage", "success", "retries") if k in rep}, indent=1))
        if "sq_assertions" in rep:
            print("assertions:", rep["sq_assertions"])
        return 0

    raw = _load_config(args.config)
    cfg = _make_cfg(raw, args.seed, args.out, args.tolerance_profile)
    rng = random.Random(cfg.seed)

    if args.verb == "gen-host":
        host = _build_host(cfg, rng)
        out = cfg.out_dir or "."
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "host.json"), "w") as fh:
            fh.write(host.to_json())
        print(f"host: n={host.n} k={host.k} e={host.e()}")
        return 0

    if args.verb == "gen-guests":
        host = _build_host(cfg, rng)
        guests = _build_guests(cfg, host, rng)
        out = cfg.out_dir or "."
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "guests.json"), "w") as fh:
            json.dump([json.loads(g.to_json()) for g in guests], fh)
        print(f"guests: {len(guests)}, edges {sum(g.e() for g in guests)}")
        return 0

    if args.verb == "pack":
        rep = run_experiment(cfg)
        ok = rep.get("success", False) and all(
            t["ok"] for t in rep.get("tester_results", [])
        )
        print(
            f"success={rep.get('success')} coverage={rep.get('coverage', 0):.3f} "
            f"error={rep.get('error', '-')}"
        )
        return 0 if ok else 1

    if args.verb == "verify":
        # config points at a bundle: {"instance": <blowup json>, "phis": [...]}
        bundle = raw
        blowup = BlowupInstance.from_json(json.dumps(bundle["instance"]))
        phis = [
            {int(x): v for x, v in phi.items()} for phi in bundle["phis"]
        ]
        rep = verify_packing(blowup, phis)
        print(f"violations={len(rep.violations)} coverage={rep.coverage:.3f} total={rep.total}")
        for v in rep.violations[:10]:
            print("  ", v)
        return 0 if rep.ok else 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
