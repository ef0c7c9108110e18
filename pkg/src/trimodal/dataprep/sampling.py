"""Surface sampling, farthest point sampling and unit-sphere normalization."""
from __future__ import annotations

import numpy as np

from .mesh import MeshError, MeshObject


def farthest_point_sample(points, n: int, start: int = 0) -> np.ndarray:
    """Greedy max-min subset selection.

    Each new index maximizes its minimum Euclidean distance to the indices
    already chosen; ties go to the lowest index. Returns indices in
    selection order.
    """
    points = np.asarray(points, dtype=np.float64)
    m = len(points)
    if n > m:
        raise ValueError(f"cannot sample {n} points from {m}")
    if not 0 <= start < m:
        raise ValueError(f"start index {start} out of range for {m} points")
    out = np.empty(n, dtype=np.int64)
    if n == 0:
        return out
    mind = np.full(m, np.inf)
    cur = start
    for i in range(n):
        out[i] = cur
        d = np.sum((points - points[cur]) ** 2, axis=1)
        np.minimum(mind, d, out=mind)
        mind[cur] = -1.0  # already chosen
        cur = int(np.argmax(mind))  # argmax returns the first maximum
    return out


def normalize_unit_sphere(points) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    p = p - p.mean(axis=0)
    scale = np.linalg.norm(p, axis=1).max()
    if scale == 0:
        raise ValueError("point set collapses to a single location")
    return p / scale


def sample_surface(mesh: MeshObject, count: int, rng: np.random.Generator):
    """Area-weighted uniform surface samples; returns (points, face_index)."""
    areas = mesh.face_areas()
    total = areas.sum()
    if not total > 0:
        raise MeshError("mesh has zero surface area")
    face_idx = rng.choice(len(areas), size=count, p=areas / total)
    u = rng.random((count, 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1 - u[flip]
    tri = mesh.triangles()[face_idx]
    pts = tri[:, 0] + u[:, :1] * (tri[:, 1] - tri[:, 0]) + u[:, 1:] * (tri[:, 2] - tri[:, 0])
    return pts, face_idx


def sample_point_cloud(
    mesh: MeshObject, n: int = 2048, oversample: int = 4, seed: int = 0, start=None
) -> np.ndarray:
    """Sample ``n`` well-spread surface points, normalized into the unit sphere.

    ``oversample * n`` candidates are drawn by area-weighted barycentric
    sampling, thinned with FPS (start index 0 unless given), then centered
    at the centroid and divided by the max norm.
    """
    rng = np.random.default_rng(seed)
    cand, _ = sample_surface(mesh, oversample * n, rng)
    idx = farthest_point_sample(cand, n, 0 if start is None else start)
    return normalize_unit_sphere(cand[idx])


def sample_labeled_point_cloud(mesh: MeshObject, face_labels, n: int = 2048, oversample: int = 4, seed: int = 0):
    """Like :func:`sample_point_cloud`, also returning each point's face label."""
    rng = np.random.default_rng(seed)
    cand, face_idx = sample_surface(mesh, oversample * n, rng)
    idx = farthest_point_sample(cand, n, 0)
    return normalize_unit_sphere(cand[idx]), np.asarray(face_labels)[face_idx[idx]]
