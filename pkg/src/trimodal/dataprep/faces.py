"""Fixed-size per-face descriptors consumed by the mesh encoder."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import MeshError, MeshObject


@dataclass
class FaceFeatureSet:
    centers: np.ndarray  # (F, 3)
    corner_vectors: np.ndarray  # (F, 3, 3) corner minus center
    normals: np.ndarray  # (F, 3) unit
    neighbor_index: np.ndarray  # (F, 3) int64

    def __len__(self):
        return len(self.centers)

    def as_dict(self):
        return {
            "centers": self.centers,
            "corners": self.corner_vectors,
            "normals": self.normals,
            "neighbors": self.neighbor_index,
        }


def face_adjacency(faces: np.ndarray) -> np.ndarray:
    """For every face, the face across each of its three edges (self if boundary)."""
    faces = np.asarray(faces)
    n = len(faces)
    edge_faces: dict[tuple, list] = {}
    for fi, (a, b, c) in enumerate(faces.tolist()):
        for u, v in ((a, b), (b, c), (c, a)):
            edge_faces.setdefault((min(u, v), max(u, v)), []).append(fi)
    nbr = np.empty((n, 3), dtype=np.int64)
    for fi, (a, b, c) in enumerate(faces.tolist()):
        for k, (u, v) in enumerate(((a, b), (b, c), (c, a))):
            others = [g for g in edge_faces[(min(u, v), max(u, v))] if g != fi]
            nbr[fi, k] = min(others) if others else fi
    return nbr


def _remap_subset(keep: np.ndarray, nbr: np.ndarray) -> np.ndarray:
    lookup = np.full(len(nbr), -1, dtype=np.int64)
    lookup[keep] = np.arange(len(keep))
    out = lookup[nbr[keep]]
    own = np.arange(len(keep))[:, None]
    return np.where(out < 0, own, out)


def extract_face_features(
    mesh: MeshObject, target_faces: int = 1024, seed: int = 0, area_eps: float = 1e-12
) -> FaceFeatureSet:
    """Per-face center, corner vectors, unit normal and edge neighbors.

    Zero-area faces are dropped first. Surplus faces are subsampled
    uniformly at random (seeded); a shortfall is filled by repeating the
    face list cyclically, each copy pointing at neighbors in its own copy.
    """
    if target_faces < 1:
        raise ValueError("target_faces must be positive")
    tri = mesh.triangles()
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norm = np.linalg.norm(cross, axis=1)
    scale = max(np.ptp(mesh.vertices, axis=0).max(), 1e-300)
    good = norm > area_eps * scale * scale
    if not good.any():
        raise MeshError("every face is degenerate")
    faces = mesh.faces[good]
    tri = tri[good]
    normals = cross[good] / norm[good, None]
    centers = tri.mean(axis=1)
    corners = tri - centers[:, None, :]
    nbr = face_adjacency(faces)

    n = len(faces)
    if n > target_faces:
        keep = np.sort(np.random.default_rng(seed).choice(n, target_faces, replace=False))
        nbr = _remap_subset(keep, nbr)
        centers, corners, normals = centers[keep], corners[keep], normals[keep]
    elif n < target_faces:
        j = np.arange(target_faces)
        orig = j % n
        block = (j // n)[:, None]
        padded = block * n + nbr[orig]
        nbr = np.where(padded < target_faces, padded, nbr[orig])
        centers, corners, normals = centers[orig], corners[orig], normals[orig]
    return FaceFeatureSet(
        centers.astype(np.float32),
        corners.astype(np.float32),
        normals.astype(np.float32),
        nbr.astype(np.int64),
    )
