"""The six networks (three backbones, three projection heads) and checkpoint I/O."""
from __future__ import annotations

import json
import shutil
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .. import archive
from .config import EncoderConfig
from .image import ImageEncoder
from .mesh import MeshEncoder
from .point import PointEncoder

MODALITIES = ("mesh", "point", "image")


class ProjectionHead(nn.Module):
    def __init__(self, din, hidden, dout):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(din, hidden), nn.ReLU(), nn.Linear(hidden, dout))

    def forward(self, x):
        return self.net(x)


class TriModalNet(nn.Module):
    def __init__(self, cfg: EncoderConfig | None = None):
        super().__init__()
        self.cfg = cfg or EncoderConfig()
        self.mesh = MeshEncoder(self.cfg)
        self.point = PointEncoder(self.cfg)
        self.image = ImageEncoder(self.cfg)
        hidden = self.cfg.c(self.cfg.head_hidden)
        self.heads = nn.ModuleDict(
            {m: ProjectionHead(getattr(self, m).out_dim, hidden, self.cfg.d_u) for m in MODALITIES}
        )

    def backbone_dim(self, modality: str) -> int:
        return getattr(self, modality).out_dim

    def encode_mesh(self, faces: dict):
        return self.mesh(faces["centers"], faces["corners"], faces["normals"], faces["neighbors"])

    def encode_point_cloud(self, points):
        return self.point(points)

    def encode_image(self, images):
        return self.image(images)

    def encode(self, modality: str, batch):
        if modality == "mesh":
            return self.encode_mesh(batch)
        if modality == "point":
            return self.encode_point_cloud(batch)
        if modality == "image":
            return self.encode_image(batch)
        raise ValueError(f"unknown modality {modality!r}")

    def project(self, feature, head: str):
        if head not in self.heads:
            raise KeyError(f"unknown projection head {head!r}")
        return self.heads[head](feature)

    def networks(self) -> dict:
        """The six separately updated networks, keyed by name."""
        out = {}
        for m in MODALITIES:
            out[m] = getattr(self, m)
            out[f"{m}_head"] = self.heads[m]
        return out


def build_model(cfg: EncoderConfig | None = None, seed: int = 0, dtype=torch.float32) -> TriModalNet:
    torch.manual_seed(seed)
    return TriModalNet(cfg).to(dtype)


def _to_numpy(t: torch.Tensor) -> np.ndarray:
    arr = t.detach().cpu().numpy()
    return arr.astype(np.float32) if arr.dtype == np.float32 else arr


def save_checkpoint(path, model: TriModalNet, meta: dict | None = None, extra: dict | None = None) -> Path:
    """Write ``<path>/tensors/<name>.bin`` for every state tensor plus ``meta.json``.

    ``extra`` maps additional names (e.g. optimizer buffers) to tensors.
    """
    path = Path(path)
    tensors = {f"model.{k}": _to_numpy(v) for k, v in model.state_dict().items()}
    for k, v in (extra or {}).items():
        tensors[k] = _to_numpy(v) if isinstance(v, torch.Tensor) else np.asarray(v)
    tmp = path.with_name(path.name + ".tmp")
    archive.save_tensors(tmp / "tensors", tensors)
    meta = dict(meta or {})
    meta["encoder_config"] = model.cfg.to_dict()
    meta["config_hash"] = model.cfg.digest()
    meta["tensors"] = sorted(tensors)
    (tmp / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    if path.exists():
        shutil.rmtree(path)
    tmp.rename(path)
    return path


def read_checkpoint(path):
    """Return (meta, tensors) where tensors maps name -> numpy array."""
    path = Path(path)
    meta = json.loads((path / "meta.json").read_text())
    tensors = archive.load_tensors(path / "tensors", meta["tensors"])
    return meta, tensors


def load_checkpoint(path, dtype=torch.float32):
    """Rebuild the model stored at ``path``; returns (model, meta, extra tensors)."""
    meta, tensors = read_checkpoint(path)
    model = TriModalNet(EncoderConfig.from_dict(meta["encoder_config"])).to(dtype)
    state = {k[len("model."):]: torch.from_numpy(v) for k, v in tensors.items() if k.startswith("model.")}
    model.load_state_dict(state)
    extra = {k: v for k, v in tensors.items() if not k.startswith("model.")}
    return model, meta, extra
