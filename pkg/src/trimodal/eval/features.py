"""Frozen-encoder feature extraction."""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .. import archive
from ..dataprep.dataset import DatasetArchive

BATCH = 16


@dataclass
class FeatureTable:
    ids: list
    labels: np.ndarray
    modality: str
    view_count: int
    features: np.ndarray  # (n, d) backbone features

    def __len__(self):
        return len(self.ids)

    def subset(self, rows) -> "FeatureTable":
        rows = np.asarray(rows)
        return FeatureTable([self.ids[i] for i in rows], self.labels[rows], self.modality, self.view_count, self.features[rows])

    def save(self, directory) -> None:
        directory = Path(directory)
        archive.save_tensor(directory / "features.bin", self.features)
        archive.write_jsonl(
            directory / "rows.jsonl",
            [{"id": i, "label": int(l), "modality": self.modality, "view_count": self.view_count} for i, l in zip(self.ids, self.labels)],
        )

    @classmethod
    def load(cls, directory) -> "FeatureTable":
        directory = Path(directory)
        rows = archive.read_jsonl(directory / "rows.jsonl")
        return cls(
            [r["id"] for r in rows],
            np.array([r["label"] for r in rows]),
            rows[0]["modality"],
            rows[0]["view_count"],
            archive.load_tensor(directory / "features.bin"),
        )


def _open(dataset) -> DatasetArchive:
    return dataset if isinstance(dataset, DatasetArchive) else DatasetArchive(dataset)


def pick_views(object_id: str, available: int, v: int, seed: int) -> np.ndarray:
    """``v`` distinct view indices, fixed per (object, seed)."""
    if v < 1:
        raise ValueError("need at least one view")
    if v > available:
        raise ValueError(f"{v} views requested but only {available} stored")
    rng = np.random.default_rng([seed, zlib.crc32(object_id.encode())])
    return np.sort(rng.choice(available, size=v, replace=False))


def _aggregate(x: torch.Tensor, how: str) -> torch.Tensor:
    if how == "mean":
        return x.mean(dim=0)
    if how == "max":
        return x.max(dim=0).values
    raise ValueError(f"unknown aggregation {how!r}")


@torch.no_grad()
def backbone_features(model, dataset, ids, modality: str, views: int = 1, aggregate: str = "mean", seed: int = 0) -> np.ndarray:
    ds = _open(dataset)
    model.eval()
    dtype = next(model.parameters()).dtype
    out = []
    for s in range(0, len(ids), BATCH):
        chunk = ids[s : s + BATCH]
        if modality == "point":
            pts = torch.as_tensor(np.stack([ds.tensor(i, "points") for i in chunk]), dtype=dtype)
            out.append(model.encode_point_cloud(pts))
        elif modality == "mesh":
            batch = {
                n: torch.as_tensor(np.stack([ds.tensor(i, n) for i in chunk]))
                for n in ("centers", "corners", "normals", "neighbors")
            }
            for n in ("centers", "corners", "normals"):
                batch[n] = batch[n].to(dtype)
            out.append(model.encode_mesh(batch))
        elif modality == "image":
            imgs, counts = [], []
            for i in chunk:
                vs = ds.tensor(i, "views")
                sel = pick_views(i, len(vs), views, seed)
                imgs.append(vs[sel])
                counts.append(len(sel))
            feats = model.encode_image(torch.as_tensor(np.concatenate(imgs), dtype=dtype))
            out.append(torch.stack([_aggregate(f, aggregate) for f in feats.split(counts)]))
        else:
            raise ValueError(f"unknown modality {modality!r}")
    return torch.cat(out).double().numpy()


def extract_feature_table(model, dataset, split: str | None, modality: str, views: int = 1, aggregate: str = "mean", seed: int = 0) -> FeatureTable:
    """Backbone features for every object in ``split``; image rows aggregate ``views`` views."""
    ds = _open(dataset)
    ids = ds.ids(split)
    labels = np.array([ds.label(i) for i in ids])
    feats = backbone_features(model, ds, ids, modality, views, aggregate, seed)
    return FeatureTable(ids, labels, modality, views if modality == "image" else 1, feats)


@torch.no_grad()
def universal_features(model, dataset, modality: str, split: str | None = "test", views: int = 1, seed: int = 0):
    """(ids, labels, projected features); images are view-averaged before projection."""
    ds = _open(dataset)
    ids = ds.ids(split)
    labels = np.array([ds.label(i) for i in ids])
    bb = backbone_features(model, ds, ids, modality, views, "mean", seed)
    proj = model.project(torch.as_tensor(bb, dtype=next(model.parameters()).dtype), modality)
    return ids, labels, proj.double().numpy()
