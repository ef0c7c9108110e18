"""Bundled procedural datasets for desk-scale runs."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import archive
from .dataprep.dataset import PrepConfig

TOY_FAMILIES = ("cylinder", "cone", "torus")


def toy_prep_config(**overrides) -> PrepConfig:
    base = dict(num_points=512, oversample=4, num_views=12, resolution=(64, 64), faces=256, seed=0)
    base.update(overrides)
    return PrepConfig(**base)


def toy_entries(families=TOY_FAMILIES, train_per_class=20, test_per_class=10, seed=0) -> list[dict]:
    """Generator-spec manifest entries; labels are family indices."""
    rng = np.random.default_rng(seed)
    entries = []
    for label, fam in enumerate(families):
        for split, count in (("train", train_per_class), ("test", test_per_class)):
            for j in range(count):
                s = int(rng.integers(2**31))
                entries.append(
                    {"id": f"{fam}_{split}_{j:03d}", "label": label, "split": split, "generator": {"family": fam, "seed": s}}
                )
    return entries


def write_toy_manifest(path, **kwargs) -> Path:
    path = Path(path)
    archive.write_jsonl(path, toy_entries(**kwargs))
    return path


def toy_train_config(**overrides):
    """Desk-scale training setup used by the bundled toy runs."""
    from .trainer import TrainConfig

    base = dict(batch_size=8, iterations=2000, base_lr=0.01, decay_every=500, width=0.125, knn=4, seed=0)
    base.update(overrides)
    return TrainConfig(**base)
