"""Part-segmentation transfer on top of the point-cloud backbone."""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..dataprep.augment import rotation_about_up
from ..dataprep.procedural import PARTS, generate
from ..dataprep.sampling import sample_labeled_point_cloud
from ..encoders import EncoderConfig, PointEncoder

TOY_PART_CATEGORIES = ("cylinder", "cone", "lamp")


@dataclass
class SegmentationRecord:
    points: np.ndarray  # (N, 3)
    labels: np.ndarray  # (N,) global part ids
    category: str

    def __post_init__(self):
        if len(self.points) != len(self.labels):
            raise ValueError("label count must equal point count")


def category_parts(categories) -> dict:
    return {c: sorted(PARTS[c].values()) for c in categories}


def make_part_dataset(categories=TOY_PART_CATEGORIES, per_category=100, num_points=512, seed=0) -> list[SegmentationRecord]:
    """Procedural shapes whose per-point part labels come from the generating faces."""
    rng = np.random.default_rng(seed)
    out = []
    for cat in categories:
        for _ in range(per_category):
            s = int(rng.integers(2**31))
            mesh, parts = generate({"family": cat, "seed": s}, with_parts=True)
            pts, labels = sample_labeled_point_cloud(mesh, parts, num_points, 4, s)
            out.append(SegmentationRecord(pts.astype(np.float32), labels, cat))
    return out


def segmentation_metrics(pred, truth, categories, category_map: dict) -> dict:
    """Overall accuracy, class mIoU and instance mIoU.

    ``pred``/``truth`` are per-shape label arrays, ``categories`` the shape
    categories and ``category_map`` maps category -> its part ids. A part
    absent from both prediction and truth of a shape scores IoU 1.
    """
    correct = total = 0
    inter: dict = {}
    union: dict = {}
    inst = []
    for p, t, cat in zip(pred, truth, categories):
        p, t = np.asarray(p), np.asarray(t)
        if p.shape != t.shape:
            raise ValueError("prediction and truth are not aligned")
        parts = category_map[cat]
        for arr in (p, t):
            bad = np.setdiff1d(np.unique(arr), parts)
            if bad.size:
                raise ValueError(f"labels {bad.tolist()} are not parts of category {cat!r}")
        correct += int(np.sum(p == t))
        total += len(t)
        ious = []
        for part in parts:
            i = int(np.sum((p == part) & (t == part)))
            u = int(np.sum((p == part) | (t == part)))
            inter[part] = inter.get(part, 0) + i
            union[part] = union.get(part, 0) + u
            ious.append(1.0 if u == 0 else i / u)
        inst.append(np.mean(ious))
    class_iou = [1.0 if union[k] == 0 else inter[k] / union[k] for k in sorted(union)]
    return {
        "overall_acc": correct / total,
        "class_miou": float(np.mean(class_iou)),
        "instance_miou": float(np.mean(inst)),
    }


class SegmentationHead(nn.Module):
    """Four FC layers over [per-point EdgeConv features, tiled global feature]."""

    def __init__(self, local_dim, global_dim, num_parts, hidden=(256, 256, 128)):
        super().__init__()
        layers, cin = [], local_dim + global_dim
        for h in hidden:
            layers += [nn.Linear(cin, h), nn.ReLU()]
            cin = h
        layers.append(nn.Linear(cin, num_parts))
        self.net = nn.Sequential(*layers)

    def forward(self, local, global_feat):
        B, N, _ = local.shape
        x = torch.cat([local, global_feat.unsqueeze(1).expand(B, N, -1)], dim=-1)
        return self.net(x)


class PartSegmenter(nn.Module):
    def __init__(self, backbone: PointEncoder, num_parts: int, hidden=(256, 256, 128)):
        super().__init__()
        self.backbone = backbone
        self.head = SegmentationHead(backbone.local_dim, backbone.out_dim, num_parts, hidden)

    def forward(self, points):
        g, local = self.backbone(points, return_local=True)
        return self.head(local, g)


def select_fraction(records, fraction: float, seed: int = 0) -> list:
    """Seeded per-category subset of ``round(fraction * count)`` shapes."""
    rng = np.random.default_rng(seed)
    chosen = []
    for cat in sorted({r.category for r in records}):
        rows = [i for i, r in enumerate(records) if r.category == cat]
        n = int(round(fraction * len(rows)))
        if n == 0:
            raise ValueError(f"category {cat!r} has no training shapes at fraction {fraction}")
        chosen += sorted(rng.choice(rows, n, replace=False).tolist())
    return [records[i] for i in chosen]


def _category_mask(records, categories, num_parts, cmap):
    mask = torch.full((len(records), num_parts), float("-inf"))
    for i, r in enumerate(records):
        mask[i, cmap[r.category]] = 0.0
    return mask


def part_segmentation(backbone, train, test, fraction: float, mode: str, seed: int = 0, steps: int = 300,
                      lr: float = 1e-3, hidden=(256, 256, 128), encoder_config: EncoderConfig | None = None) -> dict:
    """Train a segmentation head (and optionally the backbone) on a labelled fraction; report test metrics.

    ``mode``: "frozen" trains only the head on the given backbone,
    "unfrozen" fine-tunes both, "scratch" fine-tunes both from a random
    initialization of the same architecture.
    """
    if mode not in ("frozen", "unfrozen", "scratch"):
        raise ValueError(f"unknown mode {mode!r}")
    cats = sorted({r.category for r in train} | {r.category for r in test})
    cmap = category_parts(cats)
    num_parts = max(max(v) for v in cmap.values()) + 1
    subset = select_fraction(train, fraction, seed)

    torch.manual_seed(seed)
    if mode == "scratch":
        bb = PointEncoder(encoder_config or backbone.cfg)
    else:
        bb = copy.deepcopy(backbone)
    bb = bb.float()
    model = PartSegmenter(bb, num_parts, hidden)
    if mode == "frozen":
        for p in bb.parameters():
            p.requires_grad_(False)
    params = [p for p in model.parameters() if p.requires_grad]
    opt = torch.optim.Adam(params, lr=lr)

    rng = np.random.default_rng(seed)
    pts = np.stack([r.points for r in subset])
    labels = torch.as_tensor(np.stack([r.labels for r in subset]), dtype=torch.long)
    mask = _category_mask(subset, cats, num_parts, cmap)
    for _ in range(steps):
        model.train()
        if mode == "frozen":
            bb.eval()  # keep pretrained BN statistics
        aug = np.stack([p @ rotation_about_up(rng.uniform(0, 2 * np.pi)).T for p in pts])
        aug = aug + rng.normal(0, 0.01, aug.shape)
        logits = model(torch.as_tensor(aug, dtype=torch.float32)) + mask[:, None, :]
        loss = nn.functional.cross_entropy(logits.reshape(-1, num_parts), labels.reshape(-1))
        opt.zero_grad()
        loss.backward()
        opt.step()

    model.eval()
    preds = []
    with torch.no_grad():
        tmask = _category_mask(test, cats, num_parts, cmap)
        for s in range(0, len(test), 16):
            chunk = test[s : s + 16]
            x = torch.as_tensor(np.stack([r.points for r in chunk]), dtype=torch.float32)
            preds += list((model(x) + tmask[s : s + 16, None, :]).argmax(-1).numpy())
    metrics = segmentation_metrics(preds, [r.labels for r in test], [r.category for r in test], cmap)
    metrics.update(mode=mode, fraction=fraction, seed=seed, train_shapes=len(subset))
    return metrics

