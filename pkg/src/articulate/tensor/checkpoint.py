"""Named-tensor archive.

Layout (little-endian)::

    b"NTAR" | u32 entry count
    per entry: u32 name length | utf-8 name | u32 rank | rank x u32 dims | f64 payload
    trailer:   32-byte SHA-256 of every preceding byte

The trailer doubles as the manifest checksum: loaders recompute it before
trusting any payload.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

MAGIC = b"NTAR"


class ChecksumError(ValueError):
    pass


def dumps(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype="<f8")  # ascontiguousarray would promote 0-d to 1-d
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def loads(blob: bytes) -> dict[str, np.ndarray]:
    if len(blob) < 40 or blob[:4] != MAGIC:
        raise ValueError("not a tensor archive (bad magic)")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError("tensor archive checksum mismatch")
    (count,) = struct.unpack_from("<I", body, 4)
    off = 8
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", body, off)
        off += 4
        name = body[off:off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<I", body, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", body, off)
        off += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        out[name] = np.frombuffer(body, dtype="<f8", count=n, offset=off).reshape(dims).astype(np.float64)
        off += 8 * n
    if off != len(body):
        raise ValueError("trailing bytes in tensor archive")
    return out


def save(path, tensors: dict[str, np.ndarray]) -> str:
    blob = dumps(tensors)
    Path(path).write_bytes(blob)
    return blob[-32:].hex()


def load(path) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())


def checksum(path) -> str:
    return Path(path).read_bytes()[-32:].hex()
