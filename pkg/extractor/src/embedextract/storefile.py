"""Embedding-store binary writer.

Layout (integers little-endian): magic b"GWEB", version u32 = 1,
dimension u32, entry count u64, provenance u32 length + UTF-8, then per
entry a u16 key length, the UTF-8 serialized key, and dimension float32
values. Entries are sorted by serialized key, so the file bytes are a
pure function of the content.

Vectors are validated before writing: uniform dimension, finite, and a
strictly positive norm after float32 rounding, matching what store
readers enforce on load.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ExtractError

STORE_MAGIC = b"GWEB"
STORE_VERSION = 1


def write_store_file(
    path, dimension: int, entries: Mapping[str, np.ndarray], provenance: str = ""
) -> None:
    if dimension < 1:
        raise ExtractError(f"dimension must be >= 1, got {dimension}")
    rows = []
    for key in sorted(entries):
        vec = np.asarray(entries[key], dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != dimension:
            raise ExtractError(f"{key}: vector shape {vec.shape} != ({dimension},)")
        if not np.all(np.isfinite(vec)):
            raise ExtractError(f"{key}: non-finite value")
        quantized = vec.astype("<f4")
        if float(np.linalg.norm(quantized)) == 0.0:
            raise ExtractError(f"{key}: zero-norm vector after float32 rounding")
        rows.append((key, quantized))

    buf = io.BytesIO()
    buf.write(STORE_MAGIC)
    buf.write(struct.pack("<I", STORE_VERSION))
    buf.write(struct.pack("<I", dimension))
    buf.write(struct.pack("<Q", len(rows)))
    meta = provenance.encode("utf-8")
    buf.write(struct.pack("<I", len(meta)))
    buf.write(meta)
    for key, vec in rows:
        key_bytes = key.encode("utf-8")
        if len(key_bytes) > 0xFFFF:
            raise ExtractError(f"key too long to serialize: {key[:40]}...")
        buf.write(struct.pack("<H", len(key_bytes)))
        buf.write(key_bytes)
        buf.write(vec.tobytes())
    Path(path).write_bytes(buf.getvalue())
