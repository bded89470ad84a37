"""Writers for the cache formats the segmentation toolkit consumes.

Layouts (little-endian): a 4-byte magic, version u32, entry count u32,
then per entry a u16-length UTF-8 id followed by the payload. "DTSE"
embedding entries carry n u32, d u32 and n*d float32 row-major; "DTSC"
coherence entries carry m u32 and m float32 values. Rewrites are JSON
lines with fields "id", "index" (1-based), "text".

All writes are atomic: a temp file in the target directory is renamed
into place, so a crashed export never leaves a partial cache behind.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

PathLike = Union[str, Path]

EMBEDDING_MAGIC = b"DTSE"
COHERENCE_MAGIC = b"DTSC"
FORMAT_VERSION = 1


def _atomic_write(path: PathLike, data: bytes) -> None:
    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def write_embedding_cache(entries: Mapping[str, np.ndarray], path: PathLike) -> None:
    """Write per-dialogue embedding matrices; all must share one dimension."""
    dims = {matrix.shape[1] for matrix in entries.values()}
    if len(dims) > 1:
        raise ValueError(f"matrices have mixed dimensions {sorted(dims)}")
    blob = bytearray()
    blob += EMBEDDING_MAGIC
    blob += struct.pack("<I", FORMAT_VERSION)
    blob += struct.pack("<I", len(entries))
    for dialogue_id, matrix in entries.items():
        matrix = np.ascontiguousarray(matrix, dtype="<f4")
        if matrix.ndim != 2:
            raise ValueError(f"entry {dialogue_id!r} is not a matrix")
        encoded = dialogue_id.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<II", matrix.shape[0], matrix.shape[1])
        blob += matrix.tobytes(order="C")
    _atomic_write(path, bytes(blob))


def write_coherence_cache(
    entries: Mapping[str, Sequence[float]], path: PathLike
) -> None:
    """Write per-dialogue coherence series (n-1 values per dialogue)."""
    blob = bytearray()
    blob += COHERENCE_MAGIC
    blob += struct.pack("<I", FORMAT_VERSION)
    blob += struct.pack("<I", len(entries))
    for dialogue_id, values in entries.items():
        arr = np.asarray(values, dtype="<f4")
        encoded = dialogue_id.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<I", arr.shape[0])
        blob += arr.tobytes(order="C")
    _atomic_write(path, bytes(blob))


def write_rewrite_file(
    records: Iterable[tuple[str, int, str]], path: PathLike
) -> None:
    """Write (dialogue id, 1-based index, text) records as JSON lines."""
    lines = [
        json.dumps({"id": did, "index": index, "text": text}, ensure_ascii=False)
        for did, index, text in records
    ]
    _atomic_write(path, ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8"))
