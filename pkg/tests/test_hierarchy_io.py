import io

import numpy as np
import pytest

from ees import MissingEmbeddingsError, StreamFormatError, consolidate_all
from ees.hierarchy_io import (
    load_records,
    rebuild_hierarchy,
    segment_record,
    write_hierarchy,
)

from conftest import run_engine

ROWS = [[1.0, 0.0, 0.0, 0.0]] * 5 + [[0.0, 1.0, 0.0, 0.0]] * 4 + [[0.0, 0.0, 1.0, 0.0]] * 4


def flushed_hierarchy():
    engine, _ = run_engine(ROWS)
    return engine.flush()


def test_record_shape():
    h = flushed_hierarchy()
    rec = segment_record(h.segments(1)[0])
    assert list(rec) == ["level", "start_frame", "end_frame", "essential_frame", "error_peak", "provisional"]
    rec = segment_record(h.segments(1)[0], include_embedding=True)
    assert len(rec["embedding"]) == 4


def test_round_trip_preserves_consolidation():
    h = flushed_hierarchy()
    buf = io.StringIO()
    n = write_hierarchy(buf, h, include_embedding=True)
    assert n == sum(len(h.segments(lvl)) for lvl in range(1, 4))

    records = load_records(buf.getvalue().splitlines())
    rebuilt = rebuild_hierarchy(records, np.asarray(ROWS, dtype=np.float64))
    assert rebuilt.depth == h.depth
    for lvl in range(1, 4):
        got = [(s.start_frame, s.end_frame, s.essential_frame) for s in rebuilt.segments(lvl)]
        want = [(s.start_frame, s.end_frame, s.essential_frame) for s in h.segments(lvl)]
        assert got == want

    direct = consolidate_all(h)
    via_jsonl = consolidate_all(rebuilt)
    assert len(direct.summaries) == len(via_jsonl.summaries)
    for a, b in zip(direct.summaries, via_jsonl.summaries):
        np.testing.assert_allclose(a.abstract, b.abstract, atol=1e-12)
        np.testing.assert_allclose(a.coarse, b.coarse, atol=1e-12)
        np.testing.assert_allclose(a.fine, b.fine, atol=1e-12)


def test_rebuild_without_embeddings_fails_for_deep_hierarchies():
    h = flushed_hierarchy()
    buf = io.StringIO()
    write_hierarchy(buf, h, include_embedding=False)
    records = load_records(buf.getvalue().splitlines())
    with pytest.raises(MissingEmbeddingsError, match="re-run segmentation"):
        rebuild_hierarchy(records, np.asarray(ROWS, dtype=np.float64))


def test_rebuild_level1_only_needs_no_embeddings():
    engine, _ = run_engine(ROWS, levels=1)
    h = engine.flush()
    buf = io.StringIO()
    write_hierarchy(buf, h, include_embedding=False)
    rebuilt = rebuild_hierarchy(load_records(buf.getvalue().splitlines()), np.asarray(ROWS))
    result = consolidate_all(rebuilt)
    assert len(result.summaries) == len(h.segments(1))


def test_malformed_records_rejected():
    with pytest.raises(StreamFormatError, match="malformed"):
        load_records(["{not json"])
    with pytest.raises(StreamFormatError, match="missing keys"):
        load_records(['{"level": 1}'])
    with pytest.raises(StreamFormatError, match="inverted span"):
        load_records(
            ['{"level":1,"start_frame":5,"end_frame":2,"essential_frame":5,"error_peak":0.0,"provisional":false}']
        )
    with pytest.raises(StreamFormatError, match="essential frame outside"):
        load_records(
            ['{"level":1,"start_frame":0,"end_frame":2,"essential_frame":9,"error_peak":0.0,"provisional":false}']
        )


def test_rebuild_rejects_frame_overflow():
    records = load_records(
        ['{"level":1,"start_frame":0,"end_frame":99,"essential_frame":0,"error_peak":0.0,"provisional":false}']
    )
    with pytest.raises(StreamFormatError, match="references frame 99"):
        rebuild_hierarchy(records, np.asarray(ROWS))


def test_empty_records_rebuild_to_empty_hierarchy():
    h = rebuild_hierarchy([], np.asarray(ROWS))
    assert h.depth == 0
