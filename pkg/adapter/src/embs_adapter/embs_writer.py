"""Writer for the EMBS embedding-stream byte format.

Implements the documented wire layout directly so this package stays
decoupled from the engine that consumes the files::

    magic "EMBS" | version u32 = 1 | dim u32 | frame_count u64 (0 = unbounded)
    | fps_num u32 | fps_den u32 (0/0 = absent) | rows of dim float32, all LE
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO, Iterable

import numpy as np

MAGIC = b"EMBS"
VERSION = 1
_HEADER = struct.Struct("<4sIIQII")


def write_embs(
    sink: str | Path | BinaryIO,
    rows: Iterable[np.ndarray],
    dim: int,
    *,
    frame_count: int | None = None,
    fps_hint: tuple[int, int] | None = None,
) -> int:
    """Write rows to ``sink``; returns the number of rows written."""
    num, den = fps_hint if fps_hint is not None else (0, 0)
    own = isinstance(sink, (str, Path))
    fp: BinaryIO = open(sink, "wb") if own else sink  # type: ignore[assignment]
    written = 0
    try:
        fp.write(_HEADER.pack(MAGIC, VERSION, dim, frame_count or 0, num, den))
        for row in rows:
            arr = np.asarray(row, dtype=np.float64)
            if arr.shape != (dim,):
                raise ValueError(f"row {written} has shape {arr.shape}, expected ({dim},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"row {written} contains non-finite values")
            fp.write(arr.astype("<f4").tobytes())
            written += 1
        if frame_count is not None and written != frame_count:
            raise ValueError(f"declared {frame_count} frames but wrote {written}")
    finally:
        if own:
            fp.close()
    return written
