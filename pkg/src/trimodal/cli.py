"""Command-line entry point: prep, train, eval, report (plus make-toy).

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import toy
from .config import ConfigError, load_experiment_config, resolve_output_dir, resolve_train_config

log = logging.getLogger("trimodal")

TASKS = ("probe", "fewshot", "partseg", "retrieval")
MODALITIES = ("mesh", "point", "image")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trimodal", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prep", help="build a dataset archive from a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--views", type=int, default=24)
    s.add_argument("--points", type=int, default=2048)
    s.add_argument("--faces", type=int, default=1024)
    s.add_argument("--resolution", type=int, default=64)
    s.add_argument("--oversample", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("make-toy", help="write the bundled procedural manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--train-per-class", type=int, default=20)
    s.add_argument("--test-per-class", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("train", help="joint contrastive pretraining")
    s.add_argument("--data", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--out", default=None, help="output directory (overrides the config's output_dir)")
    s.add_argument("--paper-scale", action="store_true")
    s.add_argument("--resume", action="store_true")
    s.add_argument("--dry-run", action="store_true", help="resolve and echo the config, then stop")

    s = sub.add_parser("eval", help="downstream evaluation")
    s.add_argument("--task", required=True, choices=TASKS)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--modality", choices=MODALITIES, default="point")
    s.add_argument("--views", type=int, default=1)
    s.add_argument("--source", choices=MODALITIES)
    s.add_argument("--target", choices=MODALITIES)
    s.add_argument("--shots", type=int, nargs="+", default=[5, 10, 20])
    s.add_argument("--rounds", type=int, default=10)
    s.add_argument("--fraction", type=float, default=0.01)
    s.add_argument("--mode", choices=("frozen", "unfrozen", "scratch"), default="frozen")
    s.add_argument("--steps", type=int, default=300)
    s.add_argument("--baseline", type=int, default=0, help="permutations for a chance baseline")
    s.add_argument("--C", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)

    s = sub.add_parser("report", help="render result files as a static HTML page")
    s.add_argument("--from", dest="sources", nargs="+", required=True)
    s.add_argument("--out", required=True)
    return p


def cmd_prep(args) -> int:
    from .dataprep.dataset import DatasetError, PrepConfig, build_dataset

    if not Path(args.manifest).exists():
        print(f"error: manifest {args.manifest} not found", file=sys.stderr)
        return 2
    cfg = PrepConfig(
        num_points=args.points, oversample=args.oversample, num_views=args.views,
        resolution=(args.resolution, args.resolution), faces=args.faces, seed=args.seed, workers=args.workers,
    )
    try:
        summary = build_dataset(args.manifest, args.out, cfg)
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"objects": summary["objects"], "failures": len(summary["failures"]), "bytes": summary["bytes"]}))
    return 0


def cmd_make_toy(args) -> int:
    path = toy.write_toy_manifest(args.out, train_per_class=args.train_per_class, test_per_class=args.test_per_class, seed=args.seed)
    print(str(path))
    return 0


def cmd_train(args) -> int:
    from .trainer import ConfigMismatch, NonFiniteLoss, fit

    try:
        exp = load_experiment_config(args.config)
        cfg = resolve_train_config(exp, args.paper_scale)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out) if args.out else resolve_output_dir(exp, "runs/train")
    resolved = {**exp, "train": cfg.to_dict(), "output_dir": str(out)}
    print(json.dumps({"resolved_config": resolved}, sort_keys=True))
    if args.dry_run:
        return 0
    out.mkdir(parents=True, exist_ok=True)
    (out / "experiment_config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True))
    last = {}

    def progress(row):
        last.update(row)
        log.info("iter %d total %.4f", row["iter"], row["total"])

    try:
        fit(args.data, cfg, out, resume=args.resume, progress=progress)
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"final": {k: last[k] for k in ("iter", "L_MP", "L_MI", "L_PI", "L_II", "total")} if last else None}))
    return 0


def run_eval(args) -> dict:
    from .encoders import load_checkpoint
    from .eval import (
        extract_feature_table, few_shot_probe, linear_probe, make_part_dataset, part_segmentation, permutation_chance,
    )
    from .retrieval import evaluate_retrieval

    model, meta, _ = load_checkpoint(args.checkpoint)
    metrics: dict
    if args.task == "probe":
        tr = extract_feature_table(model, args.data, "train", args.modality, args.views, "mean", args.seed)
        te = extract_feature_table(model, args.data, "test", args.modality, args.views, "mean", args.seed)
        metrics = {"modality": args.modality, "views": tr.view_count, "accuracy": linear_probe(tr, te, args.C)}
        if args.baseline:
            metrics["chance"], metrics["chance_std"] = permutation_chance(tr, te, args.baseline, args.seed, args.C)
    elif args.task == "fewshot":
        tr = extract_feature_table(model, args.data, "train", args.modality, args.views, "max", args.seed)
        te = extract_feature_table(model, args.data, "test", args.modality, args.views, "max", args.seed)
        metrics = {"modality": args.modality, "views": tr.view_count,
                   "shots": {str(s): few_shot_probe(tr, te, s, args.rounds, args.seed, args.C) for s in args.shots}}
    elif args.task == "partseg":
        records = make_part_dataset(seed=args.seed + 1)
        test = make_part_dataset(per_category=20, seed=args.seed + 2)
        metrics = part_segmentation(model.point, records, test, args.fraction, args.mode, args.seed, args.steps)
    else:
        if args.source is None or args.target is None:
            raise ConfigError("retrieval needs --source and --target")
        metrics = evaluate_retrieval(model, args.data, args.source, args.target, "test", args.views, args.seed,
                                     keep_lists=True, baseline_perms=args.baseline)
    return {
        "task": args.task,
        "checkpoint": str(args.checkpoint),
        "config_hash": meta.get("config_hash"),
        "train_config_hash": meta.get("train_config_hash"),
        "data": str(Path(args.data).resolve()),
        "seed": args.seed,
        "metrics": metrics,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


def cmd_eval(args) -> int:
    try:
        result = run_eval(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_report(args) -> int:
    from .report import write_report

    missing = [s for s in args.sources if not Path(s).exists()]
    if missing:
        print(f"error: result files not found: {missing}", file=sys.stderr)
        return 2
    print(str(write_report(args.sources, args.out)))
    return 0


COMMANDS = {"prep": cmd_prep, "make-toy": cmd_make_toy, "train": cmd_train, "eval": cmd_eval, "report": cmd_report}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
