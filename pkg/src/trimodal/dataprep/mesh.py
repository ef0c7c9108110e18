"""Triangle meshes and the OFF reader."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


class MeshError(ValueError):
    pass


class OFFParseError(MeshError):
    def __init__(self, msg, lineno=None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}" if lineno is not None else msg)


@dataclass
class MeshObject:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray  # (F, 3) int64
    object_id: str = ""
    class_label: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        self.validate()

    def validate(self):
        if len(self.faces) == 0:
            raise MeshError("mesh has no faces")
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise MeshError("face index out of range")
        f = self.faces
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise MeshError("face with repeated vertex index")

    def triangles(self) -> np.ndarray:
        """(F, 3, 3) corner coordinates."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        tri = self.triangles()
        return 0.5 * np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1
        )

    def normalized(self) -> "MeshObject":
        """Copy translated to the vertex centroid and scaled into the unit sphere."""
        v = self.vertices - self.vertices.mean(axis=0)
        scale = np.linalg.norm(v, axis=1).max()
        if scale == 0:
            raise MeshError("mesh collapses to a point")
        return MeshObject(v / scale, self.faces.copy(), self.object_id, self.class_label, dict(self.meta))


def _tokens(text):
    """Yield (lineno, tokens) for non-empty, non-comment lines."""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_off(text: str, object_id: str = "", class_label=None) -> MeshObject:
    lines = list(_tokens(text))
    if not lines:
        raise OFFParseError("empty file", 1)
    lineno, toks = lines[0]
    pos = 0
    head = toks[0]
    if head == "OFF":
        rest = toks[1:]
        pos = 1
        if not rest:
            if len(lines) < 2:
                raise OFFParseError("missing counts line", lineno)
            lineno, rest = lines[1]
            pos = 2
    elif head.startswith("OFF"):
        # ModelNet ships headers glued to counts, e.g. "OFF490 518 0"
        rest = [head[3:]] + toks[1:]
        pos = 1
    else:
        raise OFFParseError(f"expected 'OFF' header, got {head!r}", lineno)
    try:
        counts = [int(t) for t in rest[:3]]
    except ValueError:
        raise OFFParseError("non-integer vertex/face counts", lineno) from None
    if len(counts) < 2:
        raise OFFParseError("counts line needs vertex and face counts", lineno)
    nv, nf = counts[0], counts[1]
    if nv < 0 or nf < 0:
        raise OFFParseError("negative counts", lineno)

    body = lines[pos:]
    if len(body) < nv + nf:
        where = body[-1][0] if body else lineno
        raise OFFParseError(
            f"header declares {nv} vertices and {nf} faces but only {len(body)} data lines follow",
            where,
        )
    verts = np.empty((nv, 3))
    for i in range(nv):
        ln, t = body[i]
        if len(t) < 3:
            raise OFFParseError("vertex line needs 3 coordinates", ln)
        try:
            verts[i] = [float(x) for x in t[:3]]
        except ValueError:
            raise OFFParseError("bad vertex coordinate", ln) from None

    tris = []
    for i in range(nv, nv + nf):
        ln, t = body[i]
        try:
            n = int(t[0])
            idx = [int(x) for x in t[1 : 1 + n]]
        except ValueError:
            raise OFFParseError("bad face line", ln) from None
        if n < 3 or len(idx) != n:
            # a vertex line where a face is expected also lands here
            raise OFFParseError(f"face declares {n} indices, found {len(idx)}", ln)
        if min(idx) < 0 or max(idx) >= nv:
            raise OFFParseError("face index out of range", ln)
        for j in range(1, n - 1):  # fan triangulation
            tri = (idx[0], idx[j], idx[j + 1])
            if len(set(tri)) == 3:
                tris.append(tri)
    if len(body) > nv + nf:
        raise OFFParseError("trailing data after declared faces", body[nv + nf][0])
    if not tris:
        raise OFFParseError("mesh has an empty face list", lineno)
    return MeshObject(verts, np.array(tris), object_id, class_label)


def load_mesh(path, object_id: Optional[str] = None, class_label=None) -> MeshObject:
    path = Path(path)
    return parse_off(path.read_text(), object_id or path.stem, class_label)


def to_off(mesh: MeshObject) -> str:
    out = ["OFF", f"{len(mesh.vertices)} {len(mesh.faces)} 0"]
    out += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    out += ["3 " + " ".join(str(int(i)) for i in f) for f in mesh.faces]
    return "\n".join(out) + "\n"


def write_off(mesh: MeshObject, path) -> None:
    Path(path).write_text(to_off(mesh))
