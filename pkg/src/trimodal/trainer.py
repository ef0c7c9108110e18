"""Joint contrastive training of the mesh, point-cloud and image networks."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from . import archive
from .contrastive import LossBreakdown, total_loss
from .dataprep.augment import AugmentConfig, augment_image, augment_mesh, augment_points
from .dataprep.dataset import DatasetArchive
from .dataprep.faces import FaceFeatureSet
from .encoders import EncoderConfig, TriModalNet, build_model, load_checkpoint, save_checkpoint

log = logging.getLogger(__name__)


class NonFiniteLoss(RuntimeError):
    def __init__(self, iteration, batch_ids, losses):
        self.iteration = iteration
        self.batch_ids = list(batch_ids)
        self.losses = losses
        super().__init__(f"non-finite loss at iteration {iteration}: {losses} (batch {self.batch_ids})")


class ConfigMismatch(RuntimeError):
    pass


PAPER_SCALE = dict(batch_size=96, iterations=160_000, base_lr=0.001, decay_every=40_000, width=1.0, knn=20)


@dataclass
class TrainConfig:
    batch_size: int = 8
    iterations: int = 2000
    base_lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0005
    lr_decay: float = 0.1
    decay_every: int = 500
    tau: float = 0.1
    seed: int = 0
    width: float = 0.125
    knn: int = 20
    d_u: int = 128
    views_per_sample: int = 2
    checkpoint_every: int | None = None
    view_assignment: str = "fixed"  # or "random": which view pairs with mesh vs point
    loss_weights: dict = field(default_factory=lambda: {"L_MP": 1.0, "L_MI": 1.0, "L_PI": 1.0, "L_II": 1.0})
    jitter_sigma: float = 0.02
    crop_scale: tuple = (0.8, 1.0)
    flip_prob: float = 0.5

    def __post_init__(self):
        self.crop_scale = tuple(self.crop_scale)
        for name in ("batch_size", "iterations", "base_lr", "decay_every", "tau", "width", "knn", "d_u"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.views_per_sample != 2:
            raise ValueError("exactly two views are drawn per sample")
        if self.view_assignment not in ("fixed", "random"):
            raise ValueError(f"unknown view assignment {self.view_assignment!r}")
        if self.decay_every % self.cadence and self.decay_every < self.iterations:
            raise ValueError("checkpoint cadence must divide the LR decay interval")

    @property
    def cadence(self) -> int:
        return self.checkpoint_every or max(100, self.iterations // 20)

    @classmethod
    def paper_scale(cls, **overrides) -> "TrainConfig":
        return cls(**{**PAPER_SCALE, **overrides})

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["crop_scale"] = list(self.crop_scale)
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def encoder_config(self, faces: int) -> EncoderConfig:
        return EncoderConfig(width=self.width, k=self.knn, faces=faces, d_u=self.d_u)

    def augment_config(self) -> AugmentConfig:
        return AugmentConfig(jitter_sigma=self.jitter_sigma, crop_scale=self.crop_scale, flip_prob=self.flip_prob)


def lr_at(iteration: int, config: TrainConfig) -> float:
    """Step schedule: multiply by ``lr_decay`` every ``decay_every`` iterations."""
    if iteration < 0:
        raise ValueError("iteration must be non-negative")
    return config.base_lr * config.lr_decay ** (iteration // config.decay_every)


class TrainData:
    """Train-split tensors held in memory for fast batch assembly."""

    def __init__(self, ds: DatasetArchive, split: str | None = "train"):
        self.ids = ds.ids(split)
        if not self.ids:
            raise ValueError(f"dataset has no objects in split {split!r}")
        self.points = np.stack([ds.tensor(i, "points") for i in self.ids])
        self.faces = [FaceFeatureSet(*(ds.tensor(i, n) for n in ("centers", "corners", "normals", "neighbors"))) for i in self.ids]
        self.views = np.stack([ds.tensor(i, "views") for i in self.ids])
        self.num_faces = len(self.faces[0])
        self.fingerprint = hashlib.sha256("\n".join(self.ids).encode()).hexdigest()[:16]

    def __len__(self):
        return len(self.ids)


@dataclass
class TrainState:
    iteration: int
    model: TriModalNet
    optimizer: torch.optim.Optimizer
    rng: np.random.Generator
    order: np.ndarray  # current epoch permutation
    cursor: int = 0


def make_optimizer(model, config: TrainConfig) -> torch.optim.SGD:
    # classic momentum; weight decay is added to the gradient
    return torch.optim.SGD(model.parameters(), lr=config.base_lr, momentum=config.momentum, weight_decay=config.weight_decay)


def init_state(config: TrainConfig, data: TrainData, dtype=torch.float32) -> TrainState:
    model = build_model(config.encoder_config(data.num_faces), seed=config.seed, dtype=dtype)
    rng = np.random.default_rng(config.seed)
    return TrainState(0, model, make_optimizer(model, config), rng, rng.permutation(len(data)), 0)


def next_batch_indices(state: TrainState, k: int) -> np.ndarray:
    """Sample without replacement within an epoch; reshuffle when the epoch runs out."""
    n = len(state.order)
    if k > n:
        raise ValueError(f"batch size {k} exceeds dataset size {n}")
    if state.cursor + k > n:
        state.order = state.rng.permutation(n)
        state.cursor = 0
    idx = state.order[state.cursor : state.cursor + k]
    state.cursor += k
    return idx


def assemble_batch(data: TrainData, idx, rng: np.random.Generator, aug: AugmentConfig, dtype=torch.float32):
    """Augmented tensors for one batch: mesh dict, points, view-1 and view-2 images."""
    pts, meshes, im1, im2 = [], [], [], []
    for i in idx:
        v1, v2 = rng.choice(data.views.shape[1], size=2, replace=False)
        pts.append(augment_points(data.points[i], rng, aug))
        meshes.append(augment_mesh(data.faces[i], rng, aug))
        im1.append(augment_image(data.views[i, v1], rng, aug))
        im2.append(augment_image(data.views[i, v2], rng, aug))
    mesh = {
        "centers": torch.as_tensor(np.stack([m.centers for m in meshes]), dtype=dtype),
        "corners": torch.as_tensor(np.stack([m.corner_vectors for m in meshes]), dtype=dtype),
        "normals": torch.as_tensor(np.stack([m.normals for m in meshes]), dtype=dtype),
        "neighbors": torch.as_tensor(np.stack([m.neighbor_index for m in meshes])),
    }
    return (
        mesh,
        torch.as_tensor(np.stack(pts), dtype=dtype),
        torch.as_tensor(np.stack(im1), dtype=dtype),
        torch.as_tensor(np.stack(im2), dtype=dtype),
    )


def forward_features(model: TriModalNet, mesh, points, img1, img2):
    """Universal-space features f_m, f_p, f_i1, f_i2; both views share one image pass."""
    f_m = model.project(model.encode_mesh(mesh), "mesh")
    f_p = model.project(model.encode_point_cloud(points), "point")
    k = img1.shape[0]
    f_i = model.project(model.encode_image(torch.cat([img1, img2])), "image")
    return f_m, f_p, f_i[:k], f_i[k:]


def train_step(state: TrainState, data: TrainData, config: TrainConfig) -> tuple[TrainState, LossBreakdown]:
    """One joint update of all six networks."""
    dtype = next(state.model.parameters()).dtype
    idx = next_batch_indices(state, config.batch_size)
    mesh, points, img1, img2 = assemble_batch(data, idx, state.rng, config.augment_config(), dtype)
    if config.view_assignment == "random" and state.rng.random() < 0.5:
        img1, img2 = img2, img1
    model = state.model
    model.train()
    f_m, f_p, f_i1, f_i2 = forward_features(model, mesh, points, img1, img2)
    losses = total_loss(f_m, f_p, f_i1, f_i2, config.tau, config.loss_weights)
    if not all(math.isfinite(v) for v in losses.as_floats().values()):
        raise NonFiniteLoss(state.iteration, [data.ids[i] for i in idx], losses.as_floats())
    lr = lr_at(state.iteration, config)
    for group in state.optimizer.param_groups:
        group["lr"] = lr
    state.optimizer.zero_grad(set_to_none=True)
    losses.total.backward()
    state.optimizer.step()
    state.iteration += 1
    return state, losses


# -- checkpoints ---------------------------------------------------------------

def _rng_state_json(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def save_train_state(path, state: TrainState, config: TrainConfig, data: TrainData) -> Path:
    extra = {}
    names = dict(state.model.named_parameters())
    id_to_name = {id(p): n for n, p in names.items()}
    for group in state.optimizer.param_groups:
        for p in group["params"]:
            buf = state.optimizer.state.get(p, {}).get("momentum_buffer")
            if buf is not None:
                extra[f"momentum.{id_to_name[id(p)]}"] = buf
    extra["order"] = state.order.astype(np.int64)
    meta = {
        "iteration": state.iteration,
        "seed": config.seed,
        "cursor": state.cursor,
        "rng_state": _rng_state_json(state.rng),
        "train_config": config.to_dict(),
        "train_config_hash": config.digest(),
        "dataset_fingerprint": data.fingerprint,
    }
    return save_checkpoint(path, state.model, meta, extra)


def load_train_state(path, config: TrainConfig, data: TrainData) -> TrainState:
    model, meta, extra = load_checkpoint(path)
    if meta.get("dataset_fingerprint") != data.fingerprint:
        raise ConfigMismatch(f"checkpoint {path} was trained on a different dataset")
    if meta.get("train_config_hash") != config.digest():
        raise ConfigMismatch(f"checkpoint {path} was written with a different training config")
    opt = make_optimizer(model, config)
    for name, p in model.named_parameters():
        key = f"momentum.{name}"
        if key in extra:
            opt.state[p]["momentum_buffer"] = torch.from_numpy(extra[key]).to(p.dtype)
    rng = np.random.default_rng()
    rng.bit_generator.state = meta["rng_state"]
    return TrainState(meta["iteration"], model, opt, rng, extra["order"], meta["cursor"])


def latest_checkpoint(out_dir) -> Path | None:
    ckdir = Path(out_dir) / "checkpoints"
    marker = ckdir / "LATEST"
    if marker.exists():
        p = ckdir / marker.read_text().strip()
        if p.exists():
            return p
    return None


def fit(dataset, config: TrainConfig, out_dir, resume: bool = False, progress=None) -> list[Path]:
    """Train for ``config.iterations`` steps, checkpointing every ``config.cadence``.

    Writes ``metrics.jsonl`` (one record per iteration) and checkpoints
    under ``checkpoints/iter_XXXXXXX``. Returns the checkpoint paths
    written by this call.
    """
    ds = dataset if isinstance(dataset, DatasetArchive) else DatasetArchive(dataset)
    data = TrainData(ds, "train")
    out_dir = Path(out_dir)
    ckdir = out_dir / "checkpoints"
    ckdir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.jsonl"

    state = None
    if resume:
        ck = latest_checkpoint(out_dir)
        if ck is not None:
            state = load_train_state(ck, config, data)
            log.info("resuming from %s at iteration %d", ck, state.iteration)
            rows = archive.read_jsonl(metrics_path) if metrics_path.exists() else []
            archive.write_jsonl(metrics_path, [r for r in rows if r["iter"] <= state.iteration])
    if state is None:
        state = init_state(config, data)
        metrics_path.write_text("")
    (out_dir / "train_config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True))

    written = []
    with open(metrics_path, "a") as mfh:
        while state.iteration < config.iterations:
            lr = lr_at(state.iteration, config)
            t0 = time.perf_counter()
            state, losses = train_step(state, data, config)
            wall_ms = (time.perf_counter() - t0) * 1000
            row = {"iter": state.iteration, "lr": lr, **losses.as_floats(), "wall_ms": round(wall_ms, 3)}
            mfh.write(json.dumps(row, sort_keys=True) + "\n")
            mfh.flush()
            if progress is not None:
                progress(row)
            if state.iteration % config.cadence == 0 or state.iteration == config.iterations:
                name = f"iter_{state.iteration:07d}"
                written.append(save_train_state(ckdir / name, state, config, data))
                (ckdir / "LATEST").write_text(name)
    return written
