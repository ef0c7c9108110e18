"""Binary tensor blobs and JSON-lines manifests.

Every tensor is stored as a little-endian header followed by raw data::

    u8  dtype code
    u8  rank
    u32 dims[rank]
    ... row-major payload, little-endian

The same layout backs datasets, checkpoints, feature tables and retrieval
indexes, so any of them can be read without this package.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

DTYPE_CODES = {
    0: np.dtype("<f4"),
    1: np.dtype("<f8"),
    2: np.dtype("<i4"),
    3: np.dtype("<i8"),
    4: np.dtype("u1"),
}
_CODE_OF = {dt: code for code, dt in DTYPE_CODES.items()}


class ArchiveError(ValueError):
    pass


def encode_tensor(array) -> bytes:
    arr = np.asarray(array)
    dt = arr.dtype.newbyteorder("<") if arr.dtype.itemsize > 1 else arr.dtype
    if dt not in _CODE_OF:
        raise ArchiveError(f"unsupported dtype {arr.dtype}")
    if arr.ndim > 255:
        raise ArchiveError("rank too large")
    header = struct.pack("<BB", _CODE_OF[dt], arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype=dt).tobytes()


def decode_tensor(buf: bytes) -> np.ndarray:
    if len(buf) < 2:
        raise ArchiveError("truncated tensor header")
    code, rank = struct.unpack_from("<BB", buf, 0)
    if code not in DTYPE_CODES:
        raise ArchiveError(f"unknown dtype code {code}")
    dims = struct.unpack_from(f"<{rank}I", buf, 2)
    offset = 2 + 4 * rank
    dt = DTYPE_CODES[code]
    count = int(np.prod(dims, dtype=np.int64))
    if len(buf) - offset != count * dt.itemsize:
        raise ArchiveError(
            f"payload size {len(buf) - offset} does not match shape {dims}"
        )
    return np.frombuffer(buf, dtype=dt, offset=offset, count=count).reshape(dims).copy()


def save_tensor(path, array) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_tensor(array)
    path.write_bytes(data)
    return len(data)


def load_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())


def save_tensors(directory, tensors: dict) -> dict:
    """Write each named tensor to ``<directory>/<name>.bin``; return name -> filename."""
    directory = Path(directory)
    names = {}
    for name, arr in tensors.items():
        fname = f"{name}.bin"
        save_tensor(directory / fname, arr)
        names[name] = fname
    return names


def load_tensors(directory, names) -> dict:
    directory = Path(directory)
    return {name: load_tensor(directory / f"{name}.bin") for name in names}


def write_jsonl(path, records) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ArchiveError(f"{path}:{lineno}: {exc}") from None
    return out
