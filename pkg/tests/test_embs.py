import hashlib
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ees import DegenerateVectorError, FrameEmbedding, StreamFormatError, StreamHeader
from ees.embs import (
    HEADER_SIZE,
    dump_stream,
    normalize_frame,
    read_stream,
    read_stream_array,
    write_stream,
)

from conftest import make_frames


def test_header_layout_is_28_bytes():
    assert HEADER_SIZE == 28


def test_single_row_round_trip():
    header = StreamHeader(dim=2, frame_count=1)
    blob = write_stream(header, make_frames([[1.0, 0.0]]))
    assert len(blob) == HEADER_SIZE + 8
    got_header, frames = read_stream(blob)
    rows = list(frames)
    assert got_header == header
    assert len(rows) == 1
    np.testing.assert_array_equal(rows[0].vector, [1.0, 0.0])


def test_unbounded_sentinel_reads_until_eof():
    header = StreamHeader(dim=4, frame_count=None)
    blob = write_stream(header, make_frames([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]]))
    got_header, frames = read_stream(blob)
    assert got_header.frame_count is None
    assert len(list(frames)) == 3


def test_round_trip_is_bit_exact():
    rng = np.random.default_rng(7)
    rows = rng.normal(size=(37, 8)).astype(np.float32).astype(np.float64)
    header = StreamHeader(dim=8, frame_count=37, fps_hint=(1, 2))
    blob = write_stream(header, make_frames(rows))
    got_header, frames = read_stream(blob)
    got_rows = [f.vector for f in frames]
    assert got_header == header
    np.testing.assert_array_equal(np.stack(got_rows), rows)
    assert write_stream(got_header, make_frames(got_rows)) == blob


def test_round_trip_hash_oracle_large():
    # 10k frames at d=512: write -> read -> write reproduces identical bytes.
    rng = np.random.default_rng(123)
    rows = rng.normal(size=(10_000, 512)).astype(np.float32).astype(np.float64)
    header = StreamHeader(dim=512, frame_count=10_000)
    blob = write_stream(header, make_frames(rows))
    got_header, got_rows = read_stream_array(blob)
    blob2 = write_stream(got_header, make_frames(got_rows))
    assert hashlib.sha256(blob).hexdigest() == hashlib.sha256(blob2).hexdigest()


def test_truncated_row_reports_frame():
    header = StreamHeader(dim=2, frame_count=None)
    blob = write_stream(header, make_frames([[1.0, 2.0]]))
    # one full row plus half of a second row
    partial = blob + np.asarray([3.0], dtype="<f4").tobytes()
    _, frames = read_stream(partial)
    with pytest.raises(StreamFormatError, match="truncated row at frame 1"):
        list(frames)


def test_bounded_stream_ending_early_is_an_error():
    header = StreamHeader(dim=2, frame_count=5)
    blob = write_stream(StreamHeader(dim=2, frame_count=2), make_frames([[1, 2], [3, 4]]))
    doctored = blob[:12] + (5).to_bytes(8, "little") + blob[20:]
    _, frames = read_stream(doctored)
    with pytest.raises(StreamFormatError, match="truncated"):
        list(frames)
    assert header.frame_count == 5


def test_bad_magic_rejected():
    with pytest.raises(StreamFormatError, match="bad magic"):
        read_stream(b"XXXX" + b"\x00" * 24)


def test_bad_version_rejected():
    header = bytearray(write_stream(StreamHeader(dim=1, frame_count=0), []))
    header[4] = 9
    with pytest.raises(StreamFormatError, match="version"):
        read_stream(bytes(header))


def test_nan_rejected_by_default_and_passed_with_flag():
    blob = write_stream(StreamHeader(dim=2, frame_count=None), make_frames([[1.0, 2.0]]))
    blob += np.asarray([np.nan, 1.0], dtype="<f4").tobytes()
    _, frames = read_stream(blob)
    with pytest.raises(StreamFormatError, match="non-finite"):
        list(frames)
    _, frames = read_stream(blob, allow_nan=True)
    rows = list(frames)
    assert len(rows) == 2 and np.isnan(rows[1].vector[0])


def test_writer_validates_dimension_and_contiguity():
    header = StreamHeader(dim=2, frame_count=None)
    with pytest.raises(StreamFormatError, match="dimension mismatch"):
        write_stream(header, make_frames([[1.0, 2.0, 3.0]]))
    frames = [FrameEmbedding(index=0, vector=[1.0, 2.0]), FrameEmbedding(index=2, vector=[1.0, 2.0])]
    with pytest.raises(StreamFormatError, match="non-contiguous"):
        write_stream(header, frames)
    with pytest.raises(StreamFormatError, match="non-finite"):
        write_stream(header, [FrameEmbedding(index=0, vector=np.array([1.0, np.inf]))])


def test_writer_validates_bounded_count():
    with pytest.raises(StreamFormatError, match="declares 3 frames"):
        write_stream(StreamHeader(dim=2, frame_count=3), make_frames([[1.0, 2.0]]))


class _CountingReader(io.BytesIO):
    def __init__(self, data: bytes) -> None:
        super().__init__(data)
        self.consumed = 0

    def read(self, size=-1):
        chunk = super().read(size)
        self.consumed += len(chunk)
        return chunk


def test_incremental_consumption_is_exact():
    d = 16
    rows = np.random.default_rng(0).normal(size=(50, d))
    blob = write_stream(StreamHeader(dim=d, frame_count=None), make_frames(rows))
    reader = _CountingReader(blob)
    _, frames = read_stream(reader)
    assert reader.consumed == HEADER_SIZE
    for k in range(1, 11):
        next(frames)
        assert reader.consumed == HEADER_SIZE + k * d * 4


def test_dump_stream_to_file(tmp_path):
    path = tmp_path / "s.embs"
    rows = [[1.0, 0.0], [0.0, 1.0]]
    with open(path, "wb") as fp:
        dump_stream(StreamHeader(dim=2, frame_count=2), make_frames(rows), fp)
    header, matrix = read_stream_array(path)
    assert header.frame_count == 2
    np.testing.assert_array_equal(matrix, rows)


def test_normalize_345_triangle():
    np.testing.assert_allclose(normalize_frame([3.0, 4.0]), [0.6, 0.8], rtol=0, atol=1e-15)


def test_normalize_idempotent_on_unit_vector():
    v = np.array([0.0, 1.0, 0.0])
    np.testing.assert_array_equal(normalize_frame(v), v)


def test_normalize_zero_vector_error():
    with pytest.raises(DegenerateVectorError, match="zero vector"):
        normalize_frame([0.0, 0.0])


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=16).filter(
        lambda v: float(np.linalg.norm(v)) > 1e-9
    )
)
def test_normalize_output_is_unit(v):
    assert abs(float(np.linalg.norm(normalize_frame(v))) - 1.0) < 1e-6
