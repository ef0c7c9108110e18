"""In-domain and cross-modal retrieval over universal-space features."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import archive

log = logging.getLogger(__name__)

DIRECTIONS = [(s, t) for s in ("mesh", "point", "image") for t in ("mesh", "point", "image")]


def l1_normalize(x) -> np.ndarray:
    """Divide by the sum of absolute values (row-wise for 2-D input)."""
    x = np.asarray(x, dtype=np.float64)
    norm = np.abs(x).sum(axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("cannot L1-normalize a zero vector")
    return x / norm


@dataclass
class RetrievalIndex:
    ids: list
    labels: np.ndarray
    modality: str
    features: np.ndarray  # (n, D), rows L1-normalized

    @classmethod
    def build(cls, ids, labels, modality, features) -> "RetrievalIndex":
        feats = l1_normalize(features)
        if feats.ndim != 2 or len(feats) != len(ids):
            raise ValueError("features must be (len(ids), D)")
        return cls(list(ids), np.asarray(labels), modality, feats)

    def __len__(self):
        return len(self.ids)

    def save(self, directory) -> None:
        directory = Path(directory)
        archive.save_tensor(directory / "features.bin", self.features)
        archive.write_jsonl(
            directory / "entries.jsonl",
            [{"id": i, "label": int(l), "modality": self.modality} for i, l in zip(self.ids, self.labels)],
        )

    @classmethod
    def load(cls, directory) -> "RetrievalIndex":
        directory = Path(directory)
        rows = archive.read_jsonl(directory / "entries.jsonl")
        feats = archive.load_tensor(directory / "features.bin")
        modality = rows[0]["modality"] if rows else ""
        return cls([r["id"] for r in rows], np.array([r["label"] for r in rows]), modality, feats)


@dataclass
class RankedList:
    query_id: str
    gallery_ids: list
    distances: np.ndarray
    relevance: np.ndarray  # bool, same class as the query

    def top(self, n=10) -> dict:
        return {
            "query": self.query_id,
            "gallery": list(self.gallery_ids[:n]),
            "distances": [float(d) for d in self.distances[:n]],
            "relevant": [bool(r) for r in self.relevance[:n]],
        }


def _order(dists: np.ndarray, ids) -> np.ndarray:
    # ascending distance, ties by gallery id
    return np.lexsort((np.asarray(ids, dtype=object).astype(str), dists))


def rank_gallery(query, index: RetrievalIndex, exclude_self: bool = False, query_id=None, query_label=None) -> RankedList:
    q = np.asarray(query, dtype=np.float64)
    if q.shape != index.features.shape[1:]:
        raise ValueError(f"query dimension {q.shape} does not match gallery {index.features.shape[1:]}")
    if len(index) == 0:
        raise ValueError("empty gallery")
    dists = np.linalg.norm(index.features - q, axis=1)
    ids = np.asarray(index.ids, dtype=object)
    keep = np.ones(len(ids), dtype=bool)
    if exclude_self and query_id is not None:
        keep = ids != query_id
    order = np.flatnonzero(keep)[_order(dists[keep], ids[keep])]
    rel = index.labels[order] == query_label if query_label is not None else np.zeros(len(order), bool)
    return RankedList(query_id, [ids[i] for i in order], dists[order], rel)


def average_precision(relevance) -> float:
    """Mean of precision@r over the ranks r holding a relevant item."""
    rel = np.asarray(relevance, dtype=bool)
    total = rel.sum()
    if total == 0:
        raise ValueError("no relevant item in the ranking")
    hits = np.cumsum(rel)
    ranks = np.arange(1, len(rel) + 1)
    return float(np.sum((hits / ranks)[rel]) / total)


def mean_average_precision(query_feats, query_ids, query_labels, index: RetrievalIndex, exclude_self: bool, keep_lists: bool = False):
    """Mean AP over queries (queries without any relevant gallery item are skipped)."""
    aps, lists = [], []
    for q, qid, ql in zip(l1_normalize(query_feats), query_ids, query_labels):
        ranked = rank_gallery(q, index, exclude_self, qid, ql)
        try:
            aps.append(average_precision(ranked.relevance))
        except ValueError:
            log.warning("query %s has no relevant gallery item; skipped", qid)
            continue
        if keep_lists:
            lists.append(ranked)
    if not aps:
        raise ValueError("no query had a relevant gallery item")
    m = float(np.mean(aps))
    return (m, lists) if keep_lists else m


def permutation_baseline(query_feats, query_ids, query_labels, index: RetrievalIndex, exclude_self: bool, n_perm=100, seed=0):
    """mAP under random reassignment of gallery labels; returns (mean, std)."""
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(n_perm):
        shuffled = RetrievalIndex(index.ids, rng.permutation(index.labels), index.modality, index.features)
        vals.append(mean_average_precision(query_feats, query_ids, query_labels, shuffled, exclude_self))
    return float(np.mean(vals)), float(np.std(vals))


def evaluate_retrieval(model, dataset, source: str, target: str, split: str = "test", views: int = 1, seed: int = 0,
                       keep_lists: bool = False, baseline_perms: int = 0):
    """Every ``split`` object queries once from ``source`` against the ``target`` gallery.

    Image features average the backbone output over ``views`` views before
    projection. Returns a dict with ``mAP`` (and optionally ranked lists
    and a permutation baseline).
    """
    from .eval.features import universal_features

    if (source, target) not in DIRECTIONS:
        raise ValueError(f"unknown modality pair {source!r} -> {target!r}")
    q_ids, q_labels, q_feats = universal_features(model, dataset, source, split, views, seed)
    if target == source:
        g_ids, g_labels, g_feats = q_ids, q_labels, q_feats
    else:
        g_ids, g_labels, g_feats = universal_features(model, dataset, target, split, views, seed)
    index = RetrievalIndex.build(g_ids, g_labels, target, g_feats)
    exclude = source == target
    out = {"source": source, "target": target, "views": views, "split": split}
    if keep_lists:
        out["mAP"], lists = mean_average_precision(q_feats, q_ids, q_labels, index, exclude, keep_lists=True)
        out["rankings"] = [r.top(10) for r in lists]
    else:
        out["mAP"] = mean_average_precision(q_feats, q_ids, q_labels, index, exclude)
    if baseline_perms:
        out["baseline_mAP"], out["baseline_std"] = permutation_baseline(q_feats, q_ids, q_labels, index, exclude, baseline_perms, seed)
    return out
