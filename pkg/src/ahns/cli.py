"""Command line: ``ahns {train,evaluate,sweep,diagnose,generate}``.

Log verbosity comes from the ``AHNS_LOG_LEVEL`` environment variable
(default ``WARNING``).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import logging
import os
import sys
from pathlib import Path

from ahns.config import SWEEP_KEYS, RunConfig
from ahns.data import load_manifest, write_interactions_csv
from ahns.errors import AHNSError, CheckpointError
from ahns.evaluation import evaluate, write_metrics_report
from ahns.experiment import DIAGNOSE_SERIES, diagnose, prepare_split, run_training, with_sampler, write_run
from ahns.model import load_checkpoint
from ahns.synth import generate_dataset

log = logging.getLogger("ahns")


def _load_config(args) -> RunConfig:
    if not getattr(args, "config", None):
        raise AHNSError("--config is required")
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.training.seed = cfg.model.init_seed = cfg.data.split_seed = args.seed
    if args.deterministic:
        cfg.training.deterministic = True
    if args.out:
        cfg.output_dir = args.out
    return cfg


def print_metrics(metrics: dict[str, float], stream=None) -> None:
    stream = stream or sys.stdout
    names = list(metrics)
    stream.write("  ".join(f"{n:>10}" for n in names) + "\n")
    stream.write("  ".join(f"{metrics[n]:>10.4f}" for n in names) + "\n")


def cmd_train(args) -> int:
    cfg = _load_config(args)
    result = run_training(cfg)
    out = write_run(result, cfg.output_dir)
    print(f"run written to {out}")
    print_metrics(result.final_metrics)
    return 0


def cmd_evaluate(args) -> int:
    model = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.manifest)
    if (model.num_users, model.num_items) != (manifest.num_users, manifest.num_items):
        raise CheckpointError(f"checkpoint is {model.num_users}x{model.num_items}, "
                              f"manifest is {manifest.num_users}x{manifest.num_items}")
    ks = tuple(int(k) for k in args.k.split(","))
    metrics = evaluate(model, manifest.dataset("train"), manifest.dataset("test"), (min(ks),), ks)
    print_metrics(metrics)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics_report([(-1, k, v) for k, v in metrics.items()], out / "metrics.json", out / "metrics.csv")
    return 0


def _cell_name(cell: dict) -> str:
    return "_".join(f"{k}={v!r}" for k, v in cell.items())


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    grid = dict(cfg.sweep)
    for key in SWEEP_KEYS:
        raw = getattr(args, key, None)
        if raw:
            grid[key] = tuple((int if key == "m" else float)(x) for x in raw.split(","))
    if not grid:
        raise AHNSError("empty sweep grid: give [sweep] values or --alpha/--beta/--p/--m")
    keys = [k for k in SWEEP_KEYS if k in grid]
    out = Path(cfg.output_dir)
    (out / "cells").mkdir(parents=True, exist_ok=True)
    manifest = prepare_split(cfg)
    rows = []
    for values in itertools.product(*(grid[k] for k in keys)):
        cell = dict(zip(keys, values))
        cell_dir = out / "cells" / _cell_name(cell)
        done = cell_dir / "result.json"
        if done.exists():
            row = json.loads(done.read_text(encoding="utf-8"))
            log.info("cell %s already complete", cell)
        else:
            row = {**cell, "status": "ok", "error": ""}
            try:
                spec = dataclasses.replace(cfg.sampler, **cell)
                res = run_training(with_sampler(cfg, spec), manifest)
                write_run(res, cell_dir)
                row.update(res.final_metrics)
                done.write_text(json.dumps(row) + "\n", encoding="utf-8")
            except Exception as e:  # a failing cell must not stop the sweep
                log.error("cell %s failed: %s", cell, e)
                row.update(status="error", error=str(e))
        rows.append(row)
    metric_cols = sorted({k for r in rows for k in r} - set(keys) - {"status", "error"})
    with (out / "sweep.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=keys + metric_cols + ["status", "error"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"{len(rows)} cells written to {out / 'sweep.csv'}")
    return 0 if all(r["status"] == "ok" for r in rows) else 1


def cmd_diagnose(args) -> int:
    cfg = _load_config(args)
    report, results = diagnose(cfg, args.window)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for label, res in results.items():
        write_run(res, out / label)
    (out / "diagnose.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    with (out / "diagnose.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sampler", "epoch", *DIAGNOSE_SERIES])
        for label, entry in report["samplers"].items():
            for e in range(len(entry["series"]["hard_mean"])):
                w.writerow([label, e, *("" if entry["series"][s][e] is None else repr(entry["series"][s][e])
                                        for s in DIAGNOSE_SERIES)])
    print(f"{'sampler':>12} {'ndcg@20':>9} {'fn_rate':>9} {'hard_slope':>11} {'s/epoch':>8}")
    for label, entry in report["samplers"].items():
        s = entry["series"]
        fn = [x for x in s["fn_rate"] if x is not None]
        secs = [x for x in s["seconds"] if x is not None]
        slope = entry["trend_slope"]["hard_mean"]
        print(f"{label:>12} {entry['final_metrics'].get('ndcg@20', float('nan')):>9.4f} "
              f"{sum(fn) / max(len(fn), 1):>9.4f} {'-' if slope is None else f'{slope:.3g}':>11} "
              f"{sum(secs) / max(len(secs), 1):>8.3f}")
    return 0


def cmd_generate(args) -> int:
    if args.config:
        s = RunConfig.load(args.config).synth
    else:
        from ahns.config import SynthConfig
        s = SynthConfig()
    overrides = {k: v for k, v in (("num_users", args.users), ("num_items", args.items), ("dim", args.dim),
                                   ("scale", args.scale), ("bias", args.bias), ("per_user", args.per_user),
                                   ("seed", args.seed)) if v is not None}
    s = dataclasses.replace(s, **overrides)
    ds = generate_dataset(s.num_users, s.num_items, s.dim, s.scale, s.per_user, seed=s.seed, bias=s.bias)
    out = Path(args.out or "interactions.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_interactions_csv(ds, out)
    print(f"{ds.num_interactions} interactions ({ds.num_users} users, {ds.num_items} items) written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config (INI)")
    common.add_argument("--seed", type=int, help="override training, init and split seeds")
    common.add_argument("--out", help="output directory (or file for generate)")
    common.add_argument("--deterministic", action="store_true", help="force sequential deterministic mode")

    p = argparse.ArgumentParser(prog="ahns", description="BPR matrix factorisation with pluggable negative samplers.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train one model").set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", parents=[common], help="evaluate a checkpoint against a split manifest")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--k", default="20,50", help="cutoffs; recall uses the smallest, ndcg all (default 20,50)")
    ev.set_defaults(func=cmd_evaluate)

    sw = sub.add_parser("sweep", parents=[common], help="grid over sampler hyperparameters")
    for key in SWEEP_KEYS:
        sw.add_argument(f"--{key}", help=f"comma-separated {key} values")
    sw.set_defaults(func=cmd_sweep)

    dg = sub.add_parser("diagnose", parents=[common], help="compare samplers side by side")
    dg.add_argument("--window", type=float, default=0.5, help="trailing window fraction for trend slopes")
    dg.set_defaults(func=cmd_diagnose)

    gen = sub.add_parser("generate", parents=[common], help="write a synthetic interaction CSV")
    for flag, typ in (("users", int), ("items", int), ("dim", int), ("scale", float), ("bias", float),
                      ("per-user", int)):
        gen.add_argument(f"--{flag}", type=typ)
    gen.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("AHNS_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AHNSError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
