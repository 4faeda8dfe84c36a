"""JSON Lines serialization of finalized segments, and hierarchy rebuild.

One record per finalized segment, in emission (causal) order::

    {"level": 2, "start_frame": 0, "end_frame": 9, "essential_frame": 5,
     "error_peak": 1.0, "provisional": false, "embedding": [...]}

``embedding`` (the segment's summary vector) is present only when requested
at segmentation time; it is required to rebuild hierarchies deeper than one
level, because a parent segment's tokens are its children's summaries.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .embs import normalize_frame
from .errors import MissingEmbeddingsError, StreamFormatError
from .types import EventHierarchy, EventSegment, LatentToken

_RECORD_KEYS = ("level", "start_frame", "end_frame", "essential_frame", "error_peak", "provisional")


def segment_record(segment: EventSegment, *, include_embedding: bool = False) -> dict:
    record = {
        "level": segment.level,
        "start_frame": segment.start_frame,
        "end_frame": segment.end_frame,
        "essential_frame": segment.essential_frame,
        "error_peak": segment.peak_error,
        "provisional": segment.provisional,
    }
    if include_embedding:
        record["embedding"] = [float(x) for x in segment.summary]
    return record


def dump_record(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"))


def write_segment(fp: TextIO, segment: EventSegment, *, include_embedding: bool = False) -> None:
    fp.write(dump_record(segment_record(segment, include_embedding=include_embedding)))
    fp.write("\n")


def write_hierarchy(
    fp: TextIO, hierarchy: EventHierarchy, *, include_embedding: bool = False
) -> int:
    """Write all segments level by level; returns the record count."""
    n = 0
    for lvl in range(1, hierarchy.depth + 1):
        for seg in hierarchy.segments(lvl):
            write_segment(fp, seg, include_embedding=include_embedding)
            n += 1
    return n


def load_records(source: str | Path | Iterable[str]) -> list[dict]:
    """Parse and validate JSONL segment records."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fp:
            lines = fp.readlines()
    else:
        lines = list(source)
    records = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StreamFormatError(f"malformed hierarchy record on line {lineno}: {exc}") from exc
        if not isinstance(rec, dict):
            raise StreamFormatError(f"hierarchy record on line {lineno} is not an object")
        missing = [k for k in _RECORD_KEYS if k not in rec]
        if missing:
            raise StreamFormatError(
                f"hierarchy record on line {lineno} missing keys {missing}"
            )
        if rec["start_frame"] > rec["end_frame"]:
            raise StreamFormatError(f"hierarchy record on line {lineno} has an inverted span")
        if not rec["start_frame"] <= rec["essential_frame"] <= rec["end_frame"]:
            raise StreamFormatError(
                f"hierarchy record on line {lineno}: essential frame outside span"
            )
        records.append(rec)
    return records


def rebuild_hierarchy(records: Sequence[dict], frames: np.ndarray) -> EventHierarchy:
    """Reconstruct an :class:`EventHierarchy` from JSONL records plus the
    original frame matrix.

    Level-1 tokens are the (normalized) source frames; higher-level tokens
    are the child segments' stored embeddings. Per-token errors are not
    serialized, so each rebuilt segment carries its peak error on the
    essential token and zero elsewhere, which preserves essential-token
    selection exactly.
    """
    if not records:
        return EventHierarchy(depth=0)
    depth = max(rec["level"] for rec in records)
    by_level: dict[int, list[dict]] = {lvl: [] for lvl in range(1, depth + 1)}
    for rec in records:
        lvl = rec["level"]
        if not 1 <= lvl <= depth:
            raise StreamFormatError(f"hierarchy record has invalid level {lvl}")
        by_level[lvl].append(rec)
    for lvl in by_level:
        by_level[lvl].sort(key=lambda r: r["start_frame"])

    hierarchy = EventHierarchy(depth=depth)
    built_by_span: dict[int, dict[tuple[int, int], EventSegment]] = {lvl: {} for lvl in by_level}
    n_frames = frames.shape[0]
    for lvl in range(1, depth + 1):
        ordinal = 0
        for rec in by_level[lvl]:
            start_f, end_f = rec["start_frame"], rec["end_frame"]
            ess_f = rec["essential_frame"]
            peak = float(rec["error_peak"])
            if lvl == 1:
                if end_f >= n_frames:
                    raise StreamFormatError(
                        f"hierarchy references frame {end_f} but the stream has {n_frames} frames"
                    )
                tokens = []
                for t in range(start_f, end_f + 1):
                    err = peak if t == ess_f else 0.0
                    tokens.append(
                        LatentToken(level=1, time=t, vector=normalize_frame(frames[t]), error=err)
                    )
                ess_ord = ordinal + (ess_f - start_f)
            else:
                children = [
                    seg
                    for span, seg in sorted(built_by_span[lvl - 1].items())
                    if span[0] >= start_f and span[1] <= end_f
                ]
                if not children:
                    raise StreamFormatError(
                        f"level-{lvl} record [{start_f}, {end_f}] has no child segments"
                    )
                tokens = []
                ess_ord = None
                for i, child in enumerate(children):
                    child_rec = _find_record(by_level[lvl - 1], child.start_frame, child.end_frame)
                    if "embedding" not in child_rec:
                        raise MissingEmbeddingsError(
                            "hierarchy records lack segment embeddings; re-run segmentation "
                            "with embeddings enabled to allow consolidation"
                        )
                    is_essential = child.start_frame <= ess_f <= child.end_frame
                    tokens.append(
                        LatentToken(
                            level=lvl,
                            time=child.end_frame,
                            start_time=child.start_frame,
                            anchor_time=child.essential_frame,
                            vector=np.asarray(child_rec["embedding"], dtype=np.float64),
                            error=peak if is_essential else 0.0,
                        )
                    )
                    if is_essential:
                        ess_ord = ordinal + i
                if ess_ord is None:
                    raise StreamFormatError(
                        f"level-{lvl} record [{start_f}, {end_f}]: essential frame {ess_f} "
                        "matches no child segment"
                    )
            summary = (
                np.asarray(rec["embedding"], dtype=np.float64)
                if "embedding" in rec
                else np.mean([t.vector for t in tokens], axis=0)
            )
            seg = EventSegment(
                level=lvl,
                start=ordinal,
                end=ordinal + len(tokens) - 1,
                tokens=tuple(tokens),
                essential_index=ess_ord,
                summary=summary,
                start_frame=start_f,
                end_frame=end_f,
                essential_frame=ess_f,
                peak_error=peak,
                finalized=True,
                provisional=bool(rec["provisional"]),
            )
            hierarchy.levels[lvl].append(seg)
            built_by_span[lvl][(start_f, end_f)] = seg
            ordinal += len(tokens)
    return hierarchy


def _find_record(records: list[dict], start_frame: int, end_frame: int) -> dict:
    for rec in records:
        if rec["start_frame"] == start_frame and rec["end_frame"] == end_frame:
            return rec
    raise StreamFormatError(f"no record for span [{start_frame}, {end_frame}]")
