"""Per-modality training augmentations. The up axis is +y."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .faces import FaceFeatureSet


@dataclass(frozen=True)
class AugmentConfig:
    jitter_sigma: float = 0.02
    crop_scale: tuple = (0.8, 1.0)
    flip_prob: float = 0.5
    rotate: bool = True


def rotation_about_up(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def resize_bilinear(img: np.ndarray, h: int, w: int) -> np.ndarray:
    """Half-pixel-centred bilinear resize of an (H, W, C) array."""
    H, W = img.shape[:2]
    ys = np.clip((np.arange(h) + 0.5) * H / h - 0.5, 0, H - 1)
    xs = np.clip((np.arange(w) + 0.5) * W / w - 0.5, 0, W - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, H - 1)
    x1 = np.minimum(x0 + 1, W - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def augment_points(points, rng, cfg=AugmentConfig(), angle=None):
    rng = np.random.default_rng(rng)
    if angle is None:
        angle = rng.uniform(0, 2 * np.pi) if cfg.rotate else 0.0
    out = np.asarray(points, dtype=np.float64) @ rotation_about_up(angle).T
    if cfg.jitter_sigma > 0:
        out = out + rng.normal(0.0, cfg.jitter_sigma, size=out.shape)
    return out


def augment_mesh(faces: FaceFeatureSet, rng, cfg=AugmentConfig(), angle=None) -> FaceFeatureSet:
    rng = np.random.default_rng(rng)
    if angle is None:
        angle = rng.uniform(0, 2 * np.pi) if cfg.rotate else 0.0
    r = rotation_about_up(angle).T
    dt = faces.centers.dtype
    return FaceFeatureSet(
        (faces.centers @ r).astype(dt),
        (faces.corner_vectors @ r).astype(dt),
        (faces.normals @ r).astype(dt),
        faces.neighbor_index.copy(),
    )


def augment_image(pixels, rng, cfg=AugmentConfig()):
    """Random square-aspect crop covering ``crop_scale`` of the area, resized back, then maybe flipped."""
    rng = np.random.default_rng(rng)
    img = np.asarray(pixels)
    H, W = img.shape[:2]
    lo, hi = cfg.crop_scale
    frac = np.sqrt(rng.uniform(lo, hi))
    ch, cw = max(1, int(round(H * frac))), max(1, int(round(W * frac)))
    top = rng.integers(0, H - ch + 1)
    left = rng.integers(0, W - cw + 1)
    out = img[top : top + ch, left : left + cw]
    if (ch, cw) != (H, W):
        out = resize_bilinear(out, H, W)
    if rng.random() < cfg.flip_prob:
        out = out[:, ::-1]
    return np.clip(out, 0.0, 1.0).astype(img.dtype)


def augment(part, modality: str, seed=None, cfg=AugmentConfig(), angle=None):
    """Dispatch on ``modality`` in {"point", "image", "mesh"}."""
    if modality == "point":
        return augment_points(part, seed, cfg, angle)
    if modality == "mesh":
        return augment_mesh(part, seed, cfg, angle)
    if modality == "image":
        return augment_image(part, seed, cfg)
    raise ValueError(f"unknown modality {modality!r}")
