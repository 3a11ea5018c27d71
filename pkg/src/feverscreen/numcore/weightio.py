"""Binary weight checkpoints.

Layout (all integers little-endian uint32, floats little-endian float64):

    magic  b"CSGW"
    version
    array_count
    per array: name_len, name (UTF-8), ndims, dims..., raw float64 data

Round trips are bit-exact; files are written atomically (temp + rename).
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from ..errors import DataError

MAGIC = b"CSGW"
VERSION = 1


def save_weights(path: str, named_arrays: list[tuple[str, np.ndarray]]) -> None:
    """Write named float64 arrays to ``path`` in checkpoint format."""
    chunks = [MAGIC, struct.pack("<II", VERSION, len(named_arrays))]
    seen = set()
    for name, arr in named_arrays:
        if name in seen:
            raise DataError(f"duplicate array name in checkpoint: {name!r}")
        seen.add(name)
        # np.asarray keeps 0-d arrays 0-d (ascontiguousarray would promote them)
        arr = np.asarray(arr, dtype=np.float64, order="C")
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
        chunks.append(arr.astype("<f8", copy=False).tobytes(order="C"))
    blob = b"".join(chunks)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".",
                               prefix=".csgw-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, blob: bytes, path: str):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise DataError(f"{self.path}: truncated checkpoint "
                            f"(wanted {n} bytes at offset {self.pos}, have {len(self.blob)})")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_weights(path: str) -> list[tuple[str, np.ndarray]]:
    """Read a checkpoint back as an ordered list of (name, float64 array)."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    r = _Reader(blob, path)
    if r.take(4) != MAGIC:
        raise DataError(f"{path}: bad magic, not a weight checkpoint")
    version = r.u32()
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    count = r.u32()
    out = []
    for _ in range(count):
        name = r.take(r.u32()).decode("utf-8")
        ndims = r.u32()
        dims = tuple(r.u32() for _ in range(ndims))
        n_elems = 1
        for d in dims:
            n_elems *= d
        data = np.frombuffer(r.take(8 * n_elems), dtype="<f8").reshape(dims)
        out.append((name, data.astype(np.float64, copy=True)))
    if r.pos != len(blob):
        raise DataError(f"{path}: {len(blob) - r.pos} trailing bytes after last array")
    return out
