"""Z-buffered software rasterizer with Phong shading.

One white point light sits at the camera, the material is grey (equal RGB)
and shading is flat per face. Lighting is two-sided because OFF meshes do
not guarantee consistent winding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import MeshObject


@dataclass(frozen=True)
class RenderConfig:
    height: int = 64
    width: int = 64
    radius: float = 2.5
    fov_deg: float = 50.0
    ambient: float = 0.1
    diffuse: float = 0.7
    specular: float = 0.2
    shininess: float = 32.0
    chunk: int = 256  # triangles rasterized per vectorized pass


@dataclass
class ImageView:
    pixels: np.ndarray  # (H, W, 3) float32 in [0, 1]
    camera_position: np.ndarray
    view_index: int


def sample_cameras(num_views: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    d = rng.standard_normal((num_views, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * radius


def look_at(eye, target=(0.0, 0.0, 0.0)):
    """Rows of the returned matrix are camera right, up, forward (world coords)."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    fwd /= np.linalg.norm(fwd)
    up = np.array([0.0, 1.0, 0.0])
    if abs(fwd @ up) > 0.999:
        up = np.array([0.0, 0.0, -1.0])
    right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    true_up = np.cross(right, fwd)
    return np.stack([right, true_up, fwd])


def phong_intensity(cos_nl, cfg: RenderConfig):
    """Intensity for a light co-located with the viewer (so V == L)."""
    c = np.abs(cos_nl)
    r_dot_v = np.clip(2.0 * c * c - 1.0, 0.0, None)
    spec = np.where(c > 0, r_dot_v**cfg.shininess, 0.0)
    return np.clip(cfg.ambient + cfg.diffuse * c + cfg.specular * spec, 0.0, 1.0)


def project(points, eye, target, cfg: RenderConfig):
    """World points -> (pixel x, pixel y, depth)."""
    rot = look_at(eye, target)
    cam = (np.asarray(points) - eye) @ rot.T
    focal = 0.5 * cfg.width / np.tan(np.radians(cfg.fov_deg) / 2)
    z = cam[..., 2]
    px = 0.5 * cfg.width + focal * cam[..., 0] / z
    py = 0.5 * cfg.height - focal * cam[..., 1] / z
    return px, py, z


def rasterize(mesh: MeshObject, eye, cfg: RenderConfig, target=None):
    """Return (face id per pixel or -1, depth buffer)."""
    h, w = cfg.height, cfg.width
    if target is None:
        target = mesh.vertices.mean(axis=0)
    px, py, z = project(mesh.vertices, eye, target, cfg)
    tri = mesh.faces
    x0, x1, x2 = px[tri[:, 0]], px[tri[:, 1]], px[tri[:, 2]]
    y0, y1, y2 = py[tri[:, 0]], py[tri[:, 1]], py[tri[:, 2]]
    iz = 1.0 / z[tri]  # screen-space linear quantity for perspective-correct depth
    area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    ok = (np.abs(area) > 1e-12) & np.all(z[tri] > 1e-6, axis=1)

    ys, xs = np.mgrid[0:h, 0:w]
    sx = (xs.ravel() + 0.5)[:, None]
    sy = (ys.ravel() + 0.5)[:, None]
    zbuf = np.full(h * w, np.inf)
    fid = np.full(h * w, -1, dtype=np.int64)
    faces = np.flatnonzero(ok)
    for s in range(0, len(faces), cfg.chunk):
        f = faces[s : s + cfg.chunk]
        a = area[f]
        w0 = ((x1[f] - sx) * (y2[f] - sy) - (x2[f] - sx) * (y1[f] - sy)) / a
        w1 = ((x2[f] - sx) * (y0[f] - sy) - (x0[f] - sx) * (y2[f] - sy)) / a
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        inv = w0 * iz[f, 0] + w1 * iz[f, 1] + w2 * iz[f, 2]
        depth = np.where(inside & (inv > 0), 1.0 / np.where(inv > 0, inv, 1.0), np.inf)
        best = np.argmin(depth, axis=1)
        bd = depth[np.arange(len(depth)), best]
        closer = bd < zbuf
        zbuf[closer] = bd[closer]
        fid[closer] = f[best[closer]]
    return fid.reshape(h, w), zbuf.reshape(h, w)


def render_view(mesh: MeshObject, eye, cfg: RenderConfig = RenderConfig(), target=None) -> np.ndarray:
    if target is None:
        target = mesh.vertices.mean(axis=0)
    eye = np.asarray(eye, dtype=np.float64)
    fid, _ = rasterize(mesh, eye, cfg, target)
    tri = mesh.triangles()
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    nn = np.linalg.norm(n, axis=1, keepdims=True)
    n = np.divide(n, nn, out=np.zeros_like(n), where=nn > 0)
    to_light = eye - tri.mean(axis=1)
    to_light /= np.linalg.norm(to_light, axis=1, keepdims=True)
    shade = phong_intensity(np.sum(n * to_light, axis=1), cfg)
    img = np.where(fid >= 0, shade[np.maximum(fid, 0)], 0.0)
    return np.repeat(img[..., None], 3, axis=2).astype(np.float32)


def render_views(
    mesh: MeshObject,
    num_views: int,
    resolution=(64, 64),
    seed: int = 0,
    cfg: RenderConfig | None = None,
    camera_positions=None,
) -> list[ImageView]:
    """Render ``num_views`` images from random cameras on a sphere around the centroid.

    ``camera_positions`` overrides the random placement (used by tests).
    """
    h, w = resolution
    if h <= 0 or w <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    if num_views < 1:
        raise ValueError("num_views must be >= 1")
    base = cfg or RenderConfig()
    cfg = RenderConfig(**{**base.__dict__, "height": int(h), "width": int(w)})
    if camera_positions is None:
        cams = sample_cameras(num_views, cfg.radius, np.random.default_rng(seed))
    else:
        cams = np.asarray(camera_positions, dtype=np.float64).reshape(-1, 3)
    return [ImageView(render_view(mesh, c, cfg), c, i) for i, c in enumerate(cams)]
