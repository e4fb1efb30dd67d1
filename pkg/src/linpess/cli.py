"""Command-line entry point: ``linpess <subcommand> ...``.

Exit codes: 0 success, 2 validation failure, 3 partial sweep failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .algos_mdp import BonusConfig
from .data import collect, load_dataset, save_dataset, split_four_way
from .model import MG, InstanceError, load_instance, save_instance, uniform_policy

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 2, 3


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _behavior_doc(beh):
    if isinstance(beh, tuple):
        return {"pi": beh[0].tolist(), "nu": beh[1].tolist()}
    return {"pi": np.asarray(beh).tolist()}


def _behavior_from(path, inst):
    if path in (None, "uniform"):
        return _uniform(inst)
    doc = _read_json(path)
    pi = np.asarray(doc["pi"], dtype=np.float64)
    if inst.kind == MG:
        return pi, np.asarray(doc["nu"], dtype=np.float64)
    return pi


def _uniform(inst):
    pi = uniform_policy(inst.H, inst.num_states, inst.num_actions)
    if inst.kind == MG:
        return pi, uniform_policy(inst.H, inst.num_states, inst.num_actions_min)
    return pi


def cmd_gen_instance(args) -> int:
    spec = _read_json(args.config) if args.config else {"generator": args.generator, "params": {}}
    params = dict(spec.get("params", {}))
    if args.seed is not None:
        params["seed"] = args.seed
    name = spec.get("generator")
    if name not in bench.GENERATORS:
        print(f"unknown generator {name!r}; choose from {sorted(bench.GENERATORS)}", file=sys.stderr)
        return EXIT_INVALID
    inst, beh = bench.GENERATORS[name](params)
    out = Path(args.out or "instance.json")
    save_instance(inst, out)
    beh_path = out.with_suffix(".behavior.json")
    beh_path.write_text(json.dumps(_behavior_doc(beh)))
    print(f"wrote {out} and {beh_path}")
    return EXIT_OK


def cmd_collect(args) -> int:
    inst = load_instance(args.instance)
    beh = _behavior_from(args.behavior, inst)
    ds = collect(inst, beh, args.K, args.seed or 0)
    out = args.out or "dataset.jsonl"
    save_dataset(ds, out)
    print(f"wrote {ds.K} trajectories to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    from . import algos_mdp, algos_mg

    inst = load_instance(args.instance)
    ds = load_dataset(args.dataset)
    cfg = BonusConfig.from_dict(_read_json(args.config) if args.config else None)
    beh = _behavior_from(args.behavior, inst) if cfg.kappa_source == "exact" else None
    fns = {
        "pevi": algos_mdp.pevi,
        "spevi": algos_mdp.spevi,
        "spmvi": algos_mg.spmvi,
        "spevi_plus": algos_mdp.spevi_plus,
        "spmvi_plus": algos_mg.spmvi_plus,
    }
    fn = fns[args.algo]
    if args.algo.endswith("_plus"):
        out = fn(*split_four_way(ds), inst.features, args.lam, cfg, inst, beh)
    else:
        out = fn(ds, inst.features, args.lam, cfg)
    text = out.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    for w in out.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = bench.ExperimentConfig.from_json(args.config)
    csv_path = args.out or str(Path(cfg.out_dir) / "results.csv")
    records = bench.sweep(cfg, jobs=args.jobs, csv_path=csv_path)
    failed = sum(1 for r in records if r.error)
    print(f"{len(records)} cells, {failed} failed; wrote {csv_path}")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_report(args) -> int:
    summary = bench.report(args.csv)
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    load_instance(args.instance)
    print(f"{args.instance}: ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linpess", description="Pessimistic offline RL with linear features.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-instance", help="generate an instance and its behavior policy")
    g.add_argument("--config", help="JSON {generator, params}")
    g.add_argument("--generator", default="graded_gap_mdp", choices=sorted(bench.GENERATORS))
    g.add_argument("--seed", type=int)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_instance)

    c = sub.add_parser("collect", help="collect an offline dataset")
    c.add_argument("--instance", required=True)
    c.add_argument("--behavior", default="uniform", help="behavior JSON or 'uniform'")
    c.add_argument("-K", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_collect)

    r = sub.add_parser("run", help="run one algorithm on a dataset")
    r.add_argument("algo", choices=list(bench.MDP_ALGOS + bench.MG_ALGOS))
    r.add_argument("--instance", required=True)
    r.add_argument("--dataset", required=True)
    r.add_argument("--behavior", default="uniform")
    r.add_argument("--lam", type=float, default=1.0)
    r.add_argument("--config", help="bonus settings JSON")
    r.add_argument("--seed", type=int, help="unused; accepted for symmetry")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a seeded (algo, K, seed) sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", help="CSV path (default out_dir/results.csv)")
    s.set_defaults(func=cmd_sweep)

    rp = sub.add_parser("report", help="summarize a sweep CSV")
    rp.add_argument("csv")
    rp.add_argument("--out")
    rp.set_defaults(func=cmd_report)

    v = sub.add_parser("validate", help="check an instance file")
    v.add_argument("instance")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, bench.ConfigError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
