"""Procedural shape families with analytic part labels.

A generator spec is a JSON-able dict::

    {"family": "cylinder", "seed": 7, "params": {"scale": [1, 1.4, 1]}}

Missing params are drawn from ``seed``. Every family also reports a part
label per face, which the toy segmentation dataset turns into per-point
labels.
"""
from __future__ import annotations

import numpy as np

from .mesh import MeshObject

# part ids are global across families
PARTS = {
    "cylinder": {"bottom_cap": 0, "top_cap": 1, "barrel": 2},
    "cone": {"base": 3, "lateral": 4},
    "box": {"top": 5, "bottom": 6, "side": 7},
    "torus": {"inner": 8, "outer": 9},
    "lamp": {"stand": 10, "shade": 11, "base": 12},
}
FAMILIES = tuple(PARTS)


class _Builder:
    def __init__(self):
        self.v: list = []
        self.f: list = []
        self.p: list = []

    def add_vertex(self, xyz) -> int:
        self.v.append(np.asarray(xyz, dtype=np.float64))
        return len(self.v) - 1

    def add_face(self, a, b, c, part):
        self.f.append((a, b, c))
        self.p.append(part)

    def add_quad(self, a, b, c, d, part):
        self.add_face(a, b, c, part)
        self.add_face(a, c, d, part)

    def build(self):
        """Weld coincident vertices, then drop faces that collapsed."""
        v = np.array(self.v)
        _, first, inverse = np.unique(v.round(9), axis=0, return_index=True, return_inverse=True)
        order = np.argsort(first)
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        f = rank[inverse.ravel()][np.array(self.f, dtype=np.int64)]
        ok = (f[:, 0] != f[:, 1]) & (f[:, 1] != f[:, 2]) & (f[:, 0] != f[:, 2])
        return v[np.sort(first)], f[ok], np.array(self.p, dtype=np.int64)[ok]


def _surface_of_revolution(b, profile, seg, parts, cap_bottom=None, cap_top=None):
    """Sweep ``profile`` [(radius, y), ...] around the y axis.

    ``parts[i]`` labels the band between profile rows i and i+1.
    """
    rings = []
    for r, y in profile:
        if r == 0:
            rings.append([b.add_vertex((0.0, y, 0.0))] * seg)
        else:
            t = 2 * np.pi * np.arange(seg) / seg
            rings.append([b.add_vertex((r * np.cos(a), y, r * np.sin(a))) for a in t])
    for i in range(len(rings) - 1):
        lo, hi = rings[i], rings[i + 1]
        for j in range(seg):
            k = (j + 1) % seg
            if lo[j] == lo[k]:
                b.add_face(lo[j], hi[k], hi[j], parts[i])
            elif hi[j] == hi[k]:
                b.add_face(lo[j], lo[k], hi[j], parts[i])
            else:
                b.add_quad(lo[j], lo[k], hi[k], hi[j], parts[i])
    for ring, part, (r, y), flip in ((rings[0], cap_bottom, profile[0], False), (rings[-1], cap_top, profile[-1], True)):
        if part is None or r == 0:
            continue
        c = b.add_vertex((0.0, y, 0.0))
        for j in range(seg):
            k = (j + 1) % seg
            if flip:
                b.add_face(c, ring[k], ring[j], part)
            else:
                b.add_face(c, ring[j], ring[k], part)


def _cylinder(rng, params):
    seg = int(params.get("segments", 16))
    bands = int(params.get("bands", 4))
    ys = np.linspace(-1, 1, bands + 1)
    p = PARTS["cylinder"]
    b = _Builder()
    _surface_of_revolution(b, [(1.0, y) for y in ys], seg, [p["barrel"]] * bands, p["bottom_cap"], p["top_cap"])
    return b


def _cone(rng, params):
    seg = int(params.get("segments", 16))
    bands = int(params.get("bands", 4))
    ys = np.linspace(-1, 1, bands + 1)
    rs = np.linspace(1, 0, bands + 1)
    p = PARTS["cone"]
    b = _Builder()
    _surface_of_revolution(b, list(zip(rs, ys)), seg, [p["lateral"]] * bands, p["base"], None)
    return b


def _torus(rng, params):
    seg = int(params.get("segments", 16))
    tube_seg = int(params.get("tube_segments", 8))
    minor = float(params.get("minor", 0.35))
    p = PARTS["torus"]
    b = _Builder()
    idx = np.empty((seg, tube_seg), dtype=int)
    for i in range(seg):
        u = 2 * np.pi * i / seg
        for j in range(tube_seg):
            w = 2 * np.pi * j / tube_seg
            r = 1.0 + minor * np.cos(w)
            idx[i, j] = b.add_vertex((r * np.cos(u), minor * np.sin(w), r * np.sin(u)))
    for i in range(seg):
        for j in range(tube_seg):
            i2, j2 = (i + 1) % seg, (j + 1) % tube_seg
            w = 2 * np.pi * (j + 0.5) / tube_seg
            part = p["outer"] if np.cos(w) >= 0 else p["inner"]
            b.add_quad(idx[i, j], idx[i2, j], idx[i2, j2], idx[i, j2], part)
    return b


def _box(rng, params):
    n = int(params.get("subdiv", 4))
    p = PARTS["box"]
    b = _Builder()
    g = np.linspace(-1, 1, n + 1)
    # (normal axis, sign, part)
    sides = [(1, 1, p["top"]), (1, -1, p["bottom"]), (0, 1, p["side"]), (0, -1, p["side"]), (2, 1, p["side"]), (2, -1, p["side"])]
    for axis, sign, part in sides:
        a1, a2 = [a for a in range(3) if a != axis]
        ids = np.empty((n + 1, n + 1), dtype=int)
        for i, s in enumerate(g):
            for j, t in enumerate(g):
                xyz = np.zeros(3)
                xyz[axis], xyz[a1], xyz[a2] = sign, s, t
                ids[i, j] = b.add_vertex(xyz)
        for i in range(n):
            for j in range(n):
                quad = (ids[i, j], ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1])
                if sign < 0:
                    quad = quad[::-1]
                b.add_quad(*quad, part)
    return b


def _lamp(rng, params):
    """Stand (thin cylinder) on a flat base disc, topped by a conical shade."""
    seg = int(params.get("segments", 12))
    p = PARTS["lamp"]
    b = _Builder()
    _surface_of_revolution(b, [(1.0, -1.0), (1.0, -0.85)], seg, [p["base"]], p["base"], p["base"])
    _surface_of_revolution(b, [(0.15, -0.85), (0.15, -0.25), (0.15, 0.3)], seg, [p["stand"]] * 2, None, None)
    _surface_of_revolution(b, [(0.9, 0.0), (0.6, 0.5), (0.3, 1.0)], seg, [p["shade"]] * 2, p["shade"], p["shade"])
    return b


_BUILDERS = {"cylinder": _cylinder, "cone": _cone, "torus": _torus, "box": _box, "lamp": _lamp}


def draw_params(family: str, rng: np.random.Generator) -> dict:
    """Random deformation parameters for ``family``."""
    return {
        "scale": rng.uniform(0.6, 1.4, size=3).round(6).tolist(),
        "taper": float(np.round(rng.uniform(-0.3, 0.3), 6)),
        "shear": float(np.round(rng.uniform(-0.2, 0.2), 6)),
        "bend": float(np.round(rng.uniform(-0.25, 0.25), 6)),
    }


def deform(v: np.ndarray, params: dict) -> np.ndarray:
    v = v.copy()
    y = v[:, 1]
    taper = 1.0 + params.get("taper", 0.0) * y
    v[:, 0] *= taper
    v[:, 2] *= taper
    v[:, 0] += params.get("shear", 0.0) * y
    v[:, 0] += params.get("bend", 0.0) * (y**2 - 1.0 / 3.0)
    return v * np.asarray(params.get("scale", [1.0, 1.0, 1.0]))


def generate(spec: dict, object_id: str | None = None, class_label=None, with_parts: bool = False):
    """Build the mesh described by a generator spec.

    Returns a :class:`MeshObject`, or ``(mesh, face_parts)`` when
    ``with_parts`` is set. The mesh is normalized into the unit sphere.
    """
    family = spec["family"]
    if family not in _BUILDERS:
        raise ValueError(f"unknown shape family {family!r}")
    seed = int(spec.get("seed", 0))
    rng = np.random.default_rng(seed)
    params = {**draw_params(family, rng), **spec.get("params", {})}
    v, f, parts = _BUILDERS[family](rng, params).build()
    v = deform(v, params)
    mesh = MeshObject(v, f, object_id or f"{family}_{seed}", class_label, {"spec": spec}).normalized()
    return (mesh, parts) if with_parts else mesh
