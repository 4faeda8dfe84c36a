"""Shared fixtures and independent oracles.

The consolidation oracle here is written as explicit staged loops over a
plain-dict mirror of the hierarchy, on purpose: it shares no code with the
package so the two can disagree.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from ees import EngineConfig, EventEngine, FrameEmbedding
from ees.types import EventHierarchy, EventSegment, LatentToken


def make_frames(rows) -> list[FrameEmbedding]:
    return [FrameEmbedding(index=i, vector=np.asarray(v, dtype=np.float64)) for i, v in enumerate(rows)]


def run_engine(rows, dim=None, levels=3, thresholds=0.4, window_cap=32, **kwargs):
    rows = list(rows)
    dim = dim or len(rows[0])
    engine = EventEngine(
        EngineConfig(dim=dim, levels=levels, thresholds=thresholds, window_cap=window_cap),
        **kwargs,
    )
    emitted = []
    for frame in make_frames(rows):
        emitted.extend(engine.ingest(frame))
    return engine, emitted


# -- independent attention / consolidation oracle --------------------------


def oracle_attention(query, keys, values, scale) -> np.ndarray:
    logits = [scale * float(np.dot(query, k)) for k in keys]
    top = max(logits)
    weights = [math.exp(l - top) for l in logits]
    total = sum(weights)
    out = np.zeros_like(np.asarray(values[0], dtype=np.float64))
    for w, v in zip(weights, values):
        out = out + (w / total) * np.asarray(v, dtype=np.float64)
    return out


def _oracle_essential(tokens) -> int:
    best = 0
    for i, tok in enumerate(tokens):
        if tok["error"] > tokens[best]["error"]:
            best = i
    return best


def oracle_consolidate_top(plain: dict, top_index: int, dim: int) -> dict:
    """Straight-line staged consolidation of one top event of a plain-dict
    hierarchy: {level: [{"span": (s, e), "tokens": [{"vector", "error"}]}]}.
    """
    scale = 1.0 / math.sqrt(dim)
    depth = max(plain)
    top = plain[depth][top_index]

    def children(level: int, span) -> list[dict]:
        return [
            seg
            for seg in plain[level]
            if seg["span"][0] >= span[0] and seg["span"][1] <= span[1]
        ]

    def intra(seg: dict) -> np.ndarray:
        toks = seg["tokens"]
        ess = _oracle_essential(toks)
        if len(toks) == 1:
            return np.asarray(toks[0]["vector"], dtype=np.float64)
        rest = [t["vector"] for i, t in enumerate(toks) if i != ess]
        return oracle_attention(toks[ess]["vector"], rest, rest, scale)

    # Stage 1: summaries of every level-1 segment below the top event.
    summaries: dict[tuple, np.ndarray] = {}
    for seg in children(1, top["span"]):
        summaries[(1, seg["span"])] = intra(seg)
    # Stages 2..depth: each segment's essential token queries its child summaries.
    for level in range(2, depth + 1):
        segs = children(level, top["span"]) if level < depth else [top]
        for seg in segs:
            toks = seg["tokens"]
            ess = _oracle_essential(toks)
            kids = children(level - 1, seg["span"])
            vals = [summaries[(level - 1, k["span"])] for k in kids]
            summaries[(level, seg["span"])] = oracle_attention(
                toks[ess]["vector"], vals, vals, scale
            )
    abstract = summaries[(depth, top["span"])]
    top_vectors = [np.asarray(t["vector"], dtype=np.float64) for t in top["tokens"]]
    coarse = sum(top_vectors) / len(top_vectors)
    fine = top_vectors[_oracle_essential(top["tokens"])]
    return {"abstract": abstract, "coarse": coarse, "fine": fine}


# -- random hierarchy builder ----------------------------------------------


def _random_partition(rng: np.random.Generator, total: int, max_parts: int) -> list[int]:
    parts = int(rng.integers(1, max_parts + 1))
    parts = min(parts, total)
    if parts == 1:
        return [total]
    cuts = np.sort(rng.choice(np.arange(1, total), size=parts - 1, replace=False))
    return np.diff(np.concatenate([[0], cuts, [total]])).tolist()


def build_random_hierarchy(
    rng: np.random.Generator, dim: int = 6, max_leaves: int = 50, depth: int = 3
) -> tuple[EventHierarchy, dict]:
    """Random but structurally valid hierarchy plus its plain-dict mirror."""
    n_frames = int(rng.integers(depth, max_leaves + 1))
    leaf_sizes = _random_partition(rng, n_frames, max_parts=max(1, n_frames // 2))

    plain: dict[int, list[dict]] = {lvl: [] for lvl in range(1, depth + 1)}
    hierarchy = EventHierarchy(depth=depth)

    # Level 1: segments over frames.
    spans = []
    t = 0
    for size in leaf_sizes:
        spans.append((t, t + size - 1))
        t += size
    level_segments: list[tuple] = []
    ordinal = 0
    for start_f, end_f in spans:
        tokens = []
        for time in range(start_f, end_f + 1):
            vec = rng.normal(size=dim)
            vec /= np.linalg.norm(vec)
            err = float(rng.uniform(0, 2))
            tokens.append({"vector": vec, "error": err, "time": time})
        plain[1].append({"span": (start_f, end_f), "tokens": tokens})
        level_segments.append((start_f, end_f, tokens))

    def to_segment(level, start_ord, span, tokens_plain):
        toks = tuple(
            LatentToken(
                level=level,
                time=tp["time"],
                start_time=tp.get("start_time", tp["time"]),
                anchor_time=tp.get("anchor_time", tp["time"]),
                vector=tp["vector"],
                error=tp["error"],
            )
            for tp in tokens_plain
        )
        ess = _oracle_essential(tokens_plain)
        return EventSegment(
            level=level,
            start=start_ord,
            end=start_ord + len(toks) - 1,
            tokens=toks,
            essential_index=start_ord + ess,
            summary=np.mean([t.vector for t in toks], axis=0),
            start_frame=span[0],
            end_frame=span[1],
            essential_frame=tokens_plain[ess].get("anchor_time", tokens_plain[ess]["time"]),
            peak_error=tokens_plain[ess]["error"],
            finalized=True,
        )

    ordinal = 0
    for span0, span1, toks in level_segments:
        hierarchy.levels[1].append(to_segment(1, ordinal, (span0, span1), toks))
        ordinal += len(toks)

    # Levels 2..depth: group the previous level's segments.
    prev = [(s["span"], s) for s in plain[1]]
    for level in range(2, depth + 1):
        groups = _random_partition(rng, len(prev), max_parts=max(1, len(prev)))
        new_prev = []
        ordinal = 0
        idx = 0
        for gsize in groups:
            members = prev[idx : idx + gsize]
            idx += gsize
            span = (members[0][0][0], members[-1][0][1])
            tokens = []
            for child_span, child in members:
                vec = rng.normal(size=dim)
                vec /= np.linalg.norm(vec)
                tokens.append(
                    {
                        "vector": vec,
                        "error": float(rng.uniform(0, 2)),
                        "time": child_span[1],
                        "start_time": child_span[0],
                        "anchor_time": child_span[1],
                    }
                )
            seg_plain = {"span": span, "tokens": tokens}
            plain[level].append(seg_plain)
            hierarchy.levels[level].append(to_segment(level, ordinal, span, tokens))
            ordinal += len(tokens)
            new_prev.append((span, seg_plain))
        prev = new_prev
    return hierarchy, plain


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
