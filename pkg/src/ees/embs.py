"""Binary embedding-stream format (EMBS) reader/writer and vector helpers.

Wire layout, all integers little-endian::

    offset  size  field
    0       4     magic  b"EMBS"
    4       4     version u32, currently 1
    8       4     dim u32
    12      8     frame_count u64, 0 = unbounded (read until EOF)
    20      4     fps_num u32  (0/0 = no fps hint)
    24      4     fps_den u32
    28      ...   payload: one row per frame, dim * float32 LE

The reader is incremental: it consumes exactly 28 + k * dim * 4 bytes to
yield k frames, so unbounded streams can be consumed from a pipe without
buffering. Payloads are float32 on the wire; everything in memory is
float64.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .errors import DegenerateVectorError, StreamFormatError
from .types import FrameEmbedding, StreamHeader

MAGIC = b"EMBS"
VERSION = 1
HEADER_STRUCT = struct.Struct("<4sIIQII")
HEADER_SIZE = HEADER_STRUCT.size  # 28

ZERO_NORM_EPS = 1e-12


def pack_header(header: StreamHeader) -> bytes:
    count = 0 if header.frame_count is None else header.frame_count
    num, den = header.fps_hint if header.fps_hint is not None else (0, 0)
    return HEADER_STRUCT.pack(MAGIC, VERSION, header.dim, count, num, den)


def unpack_header(raw: bytes) -> StreamHeader:
    if len(raw) < HEADER_SIZE:
        raise StreamFormatError(f"header truncated: got {len(raw)} of {HEADER_SIZE} bytes")
    magic, version, dim, count, num, den = HEADER_STRUCT.unpack(raw[:HEADER_SIZE])
    if magic != MAGIC:
        raise StreamFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise StreamFormatError(f"unsupported version {version}")
    if dim < 1:
        raise StreamFormatError(f"invalid dim {dim}")
    fps = (num, den) if (num, den) != (0, 0) else None
    if fps is not None and (num == 0 or den == 0):
        raise StreamFormatError(f"invalid fps hint {num}/{den}")
    return StreamHeader(dim=dim, frame_count=count if count > 0 else None, fps_hint=fps)


def dump_stream(header: StreamHeader, frames: Iterable[FrameEmbedding], sink: BinaryIO) -> int:
    """Write header plus rows to ``sink``; returns the number of rows written.

    Validates that frame indices run 0, 1, 2, ... contiguously, that every
    vector matches ``header.dim``, and that all components are finite. For a
    bounded header the row count must match the declared count.
    """
    sink.write(pack_header(header))
    expected = 0
    for frame in frames:
        if frame.index != expected:
            raise StreamFormatError(
                f"non-contiguous frame index: expected {expected}, got {frame.index}"
            )
        if frame.dim != header.dim:
            raise StreamFormatError(
                f"dimension mismatch at frame {frame.index}: header dim {header.dim}, "
                f"vector dim {frame.dim}"
            )
        if not np.all(np.isfinite(frame.vector)):
            raise StreamFormatError(f"non-finite component at frame {frame.index}")
        sink.write(frame.vector.astype("<f4").tobytes())
        expected += 1
    if header.frame_count is not None and expected != header.frame_count:
        raise StreamFormatError(
            f"bounded header declares {header.frame_count} frames but {expected} were written"
        )
    return expected


def write_stream(header: StreamHeader, frames: Iterable[FrameEmbedding]) -> bytes:
    """Serialize a whole stream to bytes. Round-trips bit-exactly through
    :func:`read_stream`."""
    buf = io.BytesIO()
    dump_stream(header, frames, buf)
    return buf.getvalue()


def _as_reader(source: bytes | bytearray | memoryview | str | Path | BinaryIO) -> BinaryIO:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return io.BytesIO(source)
    if isinstance(source, (str, Path)):
        return open(source, "rb")
    return source


def read_stream(
    source: bytes | bytearray | memoryview | str | Path | BinaryIO,
    *,
    allow_nan: bool = False,
) -> tuple[StreamHeader, Iterator[FrameEmbedding]]:
    """Parse the header eagerly and return a lazy frame iterator.

    The iterator reads one row at a time (never ahead), stops at the declared
    count or at a clean EOF for unbounded streams, and raises
    :class:`StreamFormatError` on a partial trailing row, on a bounded stream
    that ends early, and on non-finite components unless ``allow_nan``.
    """
    fp = _as_reader(source)
    raw = fp.read(HEADER_SIZE)
    header = unpack_header(raw)

    def frames() -> Iterator[FrameEmbedding]:
        row_bytes = header.dim * 4
        index = 0
        while header.frame_count is None or index < header.frame_count:
            chunk = fp.read(row_bytes)
            if not chunk:
                if header.frame_count is not None:
                    raise StreamFormatError(
                        f"stream truncated: expected {header.frame_count} frames, got {index}"
                    )
                return
            if len(chunk) < row_bytes:
                raise StreamFormatError(f"truncated row at frame {index}")
            vector = np.frombuffer(chunk, dtype="<f4").astype(np.float64)
            if not allow_nan and not np.all(np.isfinite(vector)):
                raise StreamFormatError(f"non-finite component at frame {index}")
            yield FrameEmbedding(index=index, vector=vector)
            index += 1

    return header, frames()


def read_stream_array(
    source: bytes | bytearray | memoryview | str | Path | BinaryIO,
    *,
    allow_nan: bool = False,
) -> tuple[StreamHeader, np.ndarray]:
    """Convenience: materialize the whole payload as an (n, dim) array."""
    header, frames = read_stream(source, allow_nan=allow_nan)
    rows = [f.vector for f in frames]
    if rows:
        return header, np.stack(rows)
    return header, np.empty((0, header.dim), dtype=np.float64)


def frames_from_array(matrix: np.ndarray) -> list[FrameEmbedding]:
    """Wrap an (n, dim) array as a frame list with contiguous indices."""
    matrix = np.asarray(matrix, dtype=np.float64)
    return [FrameEmbedding(index=i, vector=row) for i, row in enumerate(matrix)]


def normalize_frame(vector: np.ndarray | list[float]) -> np.ndarray:
    """Return ``vector / ||vector||_2``; idempotent on unit vectors."""
    arr = np.asarray(vector, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DegenerateVectorError("cannot normalize a non-finite vector")
    norm = float(np.linalg.norm(arr))
    if norm < ZERO_NORM_EPS:
        raise DegenerateVectorError(f"zero vector: norm {norm} below {ZERO_NORM_EPS}")
    if norm == 1.0:
        return arr
    return arr / norm
