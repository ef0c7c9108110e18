"""Build and read tri-modal dataset archives.

Layout of an archive directory::

    manifest.jsonl          one record per object: id, label, split, blobs
    prep_config.json        resolved PrepConfig used for the build
    objects/<id>/*.bin      tensor blobs (see trimodal.archive)
"""
from __future__ import annotations

import json
import logging
import re
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import archive
from .faces import FaceFeatureSet, extract_face_features
from .mesh import MeshObject, load_mesh
from .procedural import generate
from .render import RenderConfig, render_views
from .sampling import sample_point_cloud

log = logging.getLogger(__name__)

BLOB_NAMES = ("points", "centers", "corners", "normals", "neighbors", "views", "cameras")


class DatasetError(RuntimeError):
    pass


@dataclass
class PrepConfig:
    num_points: int = 2048
    oversample: int = 4
    num_views: int = 24
    resolution: tuple = (64, 64)
    faces: int = 1024
    seed: int = 0
    radius: float = 2.5
    fov_deg: float = 50.0
    workers: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "PrepConfig":
        d = dict(d)
        if "resolution" in d:
            d["resolution"] = tuple(d["resolution"])
        return cls(**d)


@dataclass
class TriModalSample:
    mesh: FaceFeatureSet
    point_cloud: np.ndarray  # (N, 3)
    views: np.ndarray  # (V, H, W, 3) float32 in [0, 1]
    cameras: np.ndarray  # (V, 3)
    object_id: str
    class_label: Optional[int] = None
    split: str = "train"


def object_seed(seed: int, object_id: str) -> int:
    """Per-object seed independent of manifest order."""
    ss = np.random.SeedSequence([seed, zlib.crc32(object_id.encode())])
    return int(ss.generate_state(1)[0])


def _safe_name(object_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", object_id)


def read_input_manifest(path) -> list[dict]:
    """Read a build manifest (JSON lines or a JSON list); resolve relative mesh paths."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("["):
        entries = json.loads(text)
    else:
        entries = archive.read_jsonl(path)
    for i, e in enumerate(entries):
        if "path" not in e and "generator" not in e:
            raise DatasetError(f"manifest entry {i} needs 'path' or 'generator'")
        if "path" in e and not Path(e["path"]).is_absolute():
            e["path"] = str(path.parent / e["path"])
        e.setdefault("id", Path(e["path"]).stem if "path" in e else f"obj{i}")
    return entries


def load_entry_mesh(entry: dict) -> MeshObject:
    label = entry.get("label")
    if "generator" in entry:
        return generate(entry["generator"], entry["id"], label)
    return load_mesh(entry["path"], entry["id"], label)


def prepare_object(mesh: MeshObject, cfg: PrepConfig) -> dict:
    """All stored tensors for one object."""
    seed = object_seed(cfg.seed, mesh.object_id)
    s_pts, s_faces, s_views = np.random.SeedSequence(seed).generate_state(3)
    mesh = mesh.normalized()
    pts = sample_point_cloud(mesh, cfg.num_points, cfg.oversample, int(s_pts))
    ff = extract_face_features(mesh, cfg.faces, int(s_faces))
    rcfg = RenderConfig(height=cfg.resolution[0], width=cfg.resolution[1], radius=cfg.radius, fov_deg=cfg.fov_deg)
    views = render_views(mesh, cfg.num_views, cfg.resolution, int(s_views), rcfg)
    pixels = np.stack([v.pixels for v in views])
    return {
        "points": pts.astype(np.float32),
        "centers": ff.centers,
        "corners": ff.corner_vectors,
        "normals": ff.normals,
        "neighbors": ff.neighbor_index,
        # quantized to 8 bits on disk; decoded back into [0, 1]
        "views": np.round(pixels * 255).astype(np.uint8),
        "cameras": np.stack([v.camera_position for v in views]).astype(np.float32),
    }


def _work(args):
    entry, cfg = args
    try:
        return entry, prepare_object(load_entry_mesh(entry), cfg), None
    except Exception as exc:  # per-object failures are skipped, not fatal
        return entry, None, f"{type(exc).__name__}: {exc}"


def build_dataset(manifest, out_dir, config: PrepConfig | None = None) -> dict:
    """Prepare every manifest entry and write the archive.

    Returns a summary dict with ``objects``, ``failures`` and ``bytes``.
    """
    cfg = config or PrepConfig()
    entries = read_input_manifest(manifest)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(e, cfg) for e in entries]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_work, jobs))  # map preserves manifest order
    else:
        results = map(_work, jobs)

    records, failures, nbytes = [], [], 0
    seen = set()
    for entry, tensors, err in results:
        oid = entry["id"]
        if err is None and oid in seen:
            err = "duplicate object id"
        if err is not None:
            log.warning("skipping %s: %s", oid, err)
            failures.append({"id": oid, "error": err})
            continue
        seen.add(oid)
        rel = Path("objects") / _safe_name(oid)
        blobs = {}
        for name, arr in tensors.items():
            nbytes += archive.save_tensor(out_dir / rel / f"{name}.bin", arr)
            blobs[name] = str(rel / f"{name}.bin")
        records.append({"id": oid, "label": entry.get("label"), "split": entry.get("split", "train"), "blobs": blobs})
    if not records:
        raise DatasetError(f"no object in {manifest} could be prepared")
    archive.write_jsonl(out_dir / "manifest.jsonl", records)
    (out_dir / "prep_config.json").write_text(json.dumps(asdict(cfg), indent=2, sort_keys=True))
    return {"objects": len(records), "failures": failures, "bytes": nbytes, "out_dir": str(out_dir)}


class DatasetArchive:
    """Read access to a built archive, seekable by object id."""

    def __init__(self, root):
        self.root = Path(root)
        mpath = self.root / "manifest.jsonl"
        if not mpath.exists():
            raise DatasetError(f"{mpath} not found")
        self.records = archive.read_jsonl(mpath)
        self._by_id = {r["id"]: r for r in self.records}
        cfg_path = self.root / "prep_config.json"
        self.config = PrepConfig.from_dict(json.loads(cfg_path.read_text())) if cfg_path.exists() else None
        self._cache: dict = {}

    def __len__(self):
        return len(self.records)

    def __contains__(self, object_id):
        return object_id in self._by_id

    def ids(self, split: str | None = None) -> list[str]:
        return [r["id"] for r in self.records if split is None or r.get("split") == split]

    def label(self, object_id):
        return self._by_id[object_id].get("label")

    def tensor(self, object_id: str, name: str) -> np.ndarray:
        key = (object_id, name)
        if key not in self._cache:
            arr = archive.load_tensor(self.root / self._by_id[object_id]["blobs"][name])
            if name == "views":
                arr = arr.astype(np.float32) / 255.0
            self._cache[key] = arr
        return self._cache[key]

    def num_views(self, object_id: str) -> int:
        return self.tensor(object_id, "views").shape[0]

    def get(self, object_id: str) -> TriModalSample:
        if object_id not in self._by_id:
            raise KeyError(object_id)
        t = {n: self.tensor(object_id, n) for n in BLOB_NAMES}
        rec = self._by_id[object_id]
        return TriModalSample(
            FaceFeatureSet(t["centers"], t["corners"], t["normals"], t["neighbors"]),
            t["points"],
            t["views"],
            t["cameras"],
            object_id,
            rec.get("label"),
            rec.get("split", "train"),
        )
