"""Little-endian checkpoint container.

Layout::

    magic   4 bytes   b"EMSQ"
    version u32
    tag     u32       structure type (see TYPE_TAGS)
    meta    u32 length + UTF-8 JSON (sorted keys, hyperparameters only)
    count   u32       number of arrays
    array*  u16 name length, name, u8 dtype code, u8 ndim,
            u64 * ndim shape, raw little-endian data

The "payload" of a container is the sum of raw array bytes; for every
frozen store and codec it equals the memory model's prediction.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np

MAGIC = b"EMSQ"
VERSION = 1

TYPE_TAGS = {
    "full": 1,
    "double_hash": 2,
    "compo": 3,
    "memcom": 4,
    "robe": 5,
    "tt_rec": 6,
    "quantized": 7,
    "fp16": 8,
    "alpt": 9,
    "mde": 10,
    "pruned": 11,
    "adaptive": 12,
    "codec_store": 13,
    "pq": 20,
    "magpq": 21,
    "svd": 22,
    "magsvd": 23,
    "tt": 24,
    "dedup": 25,
    "threshold_prune": 26,
    "int_codec": 27,
    "identity": 28,
    "dense_matrix": 40,
    "dataset": 41,
}
TAG_NAMES = {v: k for k, v in TYPE_TAGS.items()}

_DTYPES = {
    1: "<f4", 2: "<f8", 3: "<f2", 4: "i1", 5: "<i2", 6: "<i4", 7: "<i8",
    8: "u1", 9: "<u2", 10: "<u4", 11: "<u8", 12: "?",
}
_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}


class CheckpointError(ValueError):
    pass


@dataclass
class Container:
    kind: str
    meta: dict = field(default_factory=dict)
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def payload_bytes(self) -> int:
        return int(sum(a.nbytes for a in self.arrays.values()))


def dump(container: Container, fh: BinaryIO) -> None:
    try:
        tag = TYPE_TAGS[container.kind]
    except KeyError:
        raise CheckpointError(f"unknown structure kind {container.kind!r}") from None
    meta = json.dumps(container.meta, sort_keys=True, separators=(",", ":")).encode()
    fh.write(MAGIC)
    fh.write(struct.pack("<III", VERSION, tag, len(meta)))
    fh.write(meta)
    fh.write(struct.pack("<I", len(container.arrays)))
    for name, arr in container.arrays.items():
        arr = np.asarray(arr)
        dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
        if dt not in _CODES:
            raise CheckpointError(f"array {name!r}: unsupported dtype {arr.dtype}")
        raw = name.encode()
        fh.write(struct.pack("<H", len(raw)))
        fh.write(raw)
        fh.write(struct.pack("<BB", _CODES[dt], arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def dumps(container: Container) -> bytes:
    buf = io.BytesIO()
    dump(container, buf)
    return buf.getvalue()


def _read(fh: BinaryIO, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError("truncated checkpoint")
    return data


def load(fh: BinaryIO) -> Container:
    if _read(fh, 4) != MAGIC:
        raise CheckpointError("bad magic; not an EMSQ checkpoint")
    version, tag, meta_len = struct.unpack("<III", _read(fh, 12))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if tag not in TAG_NAMES:
        raise CheckpointError(f"unknown type tag {tag}")
    meta = json.loads(_read(fh, meta_len).decode())
    (count,) = struct.unpack("<I", _read(fh, 4))
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", _read(fh, 2))
        name = _read(fh, nlen).decode()
        code, ndim = struct.unpack("<BB", _read(fh, 2))
        if code not in _DTYPES:
            raise CheckpointError(f"array {name!r}: unknown dtype code {code}")
        shape = struct.unpack(f"<{ndim}Q", _read(fh, 8 * ndim))
        dt = np.dtype(_DTYPES[code])
        size = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        arrays[name] = np.frombuffer(_read(fh, size), dtype=dt).reshape(shape).copy()
    return Container(TAG_NAMES[tag], meta, arrays)


def loads(data: bytes) -> Container:
    return load(io.BytesIO(data))


def save(container: Container, path) -> Path:
    path = Path(path)
    with open(path, "wb") as fh:
        dump(container, fh)
    return path


def read(path) -> Container:
    with open(path, "rb") as fh:
        return load(fh)


def save_matrix(matrix: np.ndarray, path) -> Path:
    return save(Container("dense_matrix", {}, {"values": np.asarray(matrix, dtype=np.float32)}), path)


def load_matrix(path) -> np.ndarray:
    """Dense matrix from a checkpoint, or raw f32 with a ``<path>.shape`` sidecar."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        c = read(path)
        if c.kind != "dense_matrix":
            raise CheckpointError(f"{path}: expected a dense matrix, found {c.kind}")
        return c.arrays["values"]
    sidecar = path.with_name(path.name + ".shape")
    if not sidecar.exists():
        raise CheckpointError(f"{path}: raw matrix needs a shape sidecar at {sidecar}")
    rows, cols = (int(t) for t in sidecar.read_text().replace(",", " ").split())
    values = np.fromfile(path, dtype="<f4")
    if values.size != rows * cols:
        raise CheckpointError(f"{path}: {values.size} floats do not match shape {rows}x{cols}")
    return values.reshape(rows, cols)
