"""End-to-end toy experiment: build data, pretrain, evaluate."""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from . import archive, toy
from .dataprep import DatasetArchive, build_dataset
from .encoders import load_checkpoint
from .eval import extract_feature_table, few_shot_probe, linear_probe, make_part_dataset, part_segmentation, permutation_chance
from .retrieval import evaluate_retrieval
from .trainer import fit, latest_checkpoint

log = logging.getLogger(__name__)

MODALITIES = ("mesh", "point", "image")
CROSS_MODAL = [(s, t) for s in MODALITIES for t in MODALITIES if s != t]
LOSS_FIELDS = ("L_MP", "L_MI", "L_PI", "L_II", "total")


def loss_trend(metrics_path, fraction: float = 0.05) -> dict:
    """Mean total loss over the first and last ``fraction`` of iterations."""
    totals = np.array([r["total"] for r in archive.read_jsonl(metrics_path)])
    n = max(1, int(round(fraction * len(totals))))
    return {"first": float(totals[:n].mean()), "last": float(totals[-n:].mean()), "window": n}


def prepare_toy_data(workdir, seed: int = 0) -> Path:
    workdir = Path(workdir)
    data = workdir / "data"
    if not (data / "manifest.jsonl").exists():
        toy.write_toy_manifest(workdir / "toy_manifest.jsonl", seed=seed)
        build_dataset(workdir / "toy_manifest.jsonl", data, toy.toy_prep_config(seed=seed))
    return data


def evaluate_toy(checkpoint, data, seed: int = 0, chance_perms: int = 20, baseline_perms: int = 20) -> dict:
    """Linear probes with permutation chance, six cross-modal retrievals, image retrieval at v=1 and v=4."""
    model, _, _ = load_checkpoint(checkpoint)
    out: dict = {"probe": {}, "retrieval": {}, "image_views": {}}
    for m in MODALITIES:
        tr = extract_feature_table(model, data, "train", m, 1, "mean", seed)
        te = extract_feature_table(model, data, "test", m, 1, "mean", seed)
        chance, chance_std = permutation_chance(tr, te, chance_perms, seed)
        out["probe"][m] = {"accuracy": linear_probe(tr, te), "chance": chance, "chance_std": chance_std}
    for s, t in CROSS_MODAL:
        r = evaluate_retrieval(model, data, s, t, "test", 1, seed, keep_lists=True, baseline_perms=baseline_perms)
        out["retrieval"][f"{s}->{t}"] = r
    for v in (1, 4):
        out["image_views"][str(v)] = evaluate_retrieval(model, data, "image", "image", "test", v, seed, keep_lists=True)
    return out


def run_toy_pipeline(workdir, seed: int = 0, iterations: int | None = None, progress=None) -> dict:
    """Build the toy archive (once), train, evaluate; writes ``results.json`` and returns it."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    data = prepare_toy_data(workdir, seed)
    cfg = toy.toy_train_config(seed=seed, **({"iterations": iterations} if iterations else {}))
    run = workdir / "run"
    fit(data, cfg, run, resume=True, progress=progress)
    ck = latest_checkpoint(run)
    results = {
        "checkpoint": str(ck),
        "data": str(data),
        "train_config": cfg.to_dict(),
        "loss": loss_trend(run / "metrics.jsonl"),
        **evaluate_toy(ck, data, seed),
    }
    (workdir / "results.json").write_text(json.dumps(results, indent=2, sort_keys=True))
    return results


def few_shot_trend(checkpoint, data, shots=(5, 10, 20), rounds: int = 10, seed: int = 0) -> dict:
    """Mean few-shot accuracy per modality and shot count (image views max-pooled)."""
    model, _, _ = load_checkpoint(checkpoint)
    out = {}
    for m in MODALITIES:
        views = 4 if m == "image" else 1
        tr = extract_feature_table(model, data, "train", m, views, "max", seed)
        te = extract_feature_table(model, data, "test", m, views, "max", seed)
        out[m] = {str(s): few_shot_probe(tr, te, s, rounds, seed)["mean"] for s in shots}
    return out


def segmentation_trend(checkpoint, fraction: float = 0.01, seeds=(0, 1, 2), steps: int = 300,
                       per_category: int = 300, test_per_category: int = 20) -> dict:
    """Mean instance mIoU over ``seeds`` for each training mode."""
    model, _, _ = load_checkpoint(checkpoint)
    train = make_part_dataset(per_category=per_category, seed=0)
    test = make_part_dataset(per_category=test_per_category, seed=1)
    out = {}
    for mode in ("unfrozen", "frozen", "scratch"):
        runs = [part_segmentation(model.point, train, test, fraction, mode, seed=s, steps=steps) for s in seeds]
        out[mode] = {"instance_miou": float(np.mean([r["instance_miou"] for r in runs])), "runs": runs}
    return out
