from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass


@dataclass
class EncoderConfig:
    """Channel layout of the three backbones and the projection heads.

    Defaults are the full-size networks; ``width`` shrinks every channel
    list uniformly (e.g. 0.125 for desk-scale runs).
    """

    width: float = 1.0
    k: int = 20  # EdgeConv neighbours
    faces: int = 1024
    d_u: int = 128
    image_stages: tuple = (64, 128, 256, 512)
    edge_channels: tuple = (64, 64, 64, 128)
    point_fc: int = 512
    spatial: tuple = (64, 64)
    rotate: tuple = (32, 32)
    rotate_fuse: tuple = (64, 64)
    kernels: int = 64
    kernel_size: int = 4  # unit vectors per correlation kernel
    kernel_sigma: float = 0.2
    mesh_conv1: tuple = (256, 256)  # (spatial out, structural out)
    mesh_conv2: tuple = (512, 512)
    mesh_fuse: int = 1024
    global_dim: int = 512
    head_hidden: int = 512

    def __post_init__(self):
        for name in ("width", "k", "faces", "d_u", "kernel_size", "kernel_sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name, value in asdict(self).items():
            if isinstance(value, list):
                setattr(self, name, tuple(value))

    def c(self, n: int) -> int:
        """Scaled channel count."""
        return max(1, int(round(n * self.width)))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
