"""Segmentation quality metrics: boundary F1 and cohesion statistics."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .synthetic import GroundTruth
from .types import EventSegment, FrameEmbedding

Span = tuple[int, int]


def spans_to_boundaries(spans: Sequence[Span]) -> list[int]:
    """Start frames of every span except the first."""
    ordered = sorted(spans)
    return [s for s, _ in ordered[1:]]


def segments_to_spans(segments: Sequence[EventSegment | Span]) -> list[Span]:
    spans = [
        (s.start_frame, s.end_frame) if isinstance(s, EventSegment) else (int(s[0]), int(s[1]))
        for s in segments
    ]
    return sorted(spans)


def boundary_f1(
    predicted: Sequence[int],
    truth: GroundTruth | Sequence[int],
    tolerance: int = 1,
) -> dict:
    """Greedy nearest matching of predicted to true boundaries within
    +-tolerance frames, then standard precision/recall/F1. Two empty sets
    agree perfectly."""
    true_bounds = list(truth.boundary_frames) if isinstance(truth, GroundTruth) else list(truth)
    pred = sorted(predicted)
    if not pred and not true_bounds:
        return {"precision": 1.0, "recall": 1.0, "f1": 1.0, "matched": 0}

    candidates = [
        (abs(p - t), pi, ti)
        for pi, p in enumerate(pred)
        for ti, t in enumerate(true_bounds)
        if abs(p - t) <= tolerance
    ]
    candidates.sort()
    used_pred: set[int] = set()
    used_true: set[int] = set()
    matched = 0
    for _, pi, ti in candidates:
        if pi in used_pred or ti in used_true:
            continue
        used_pred.add(pi)
        used_true.add(ti)
        matched += 1
    precision = matched / len(pred) if pred else 0.0
    recall = matched / len(true_bounds) if true_bounds else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return {"precision": precision, "recall": recall, "f1": f1, "matched": matched}


def _unit_matrix(frames: Sequence[FrameEmbedding] | np.ndarray) -> np.ndarray:
    data = np.asarray(frames, dtype=np.float64) if isinstance(frames, np.ndarray) else np.stack(
        [f.vector for f in frames]
    )
    norms = np.linalg.norm(data, axis=1)
    norms = np.where(norms < 1e-12, 1.0, norms)
    return data / norms[:, None]


def _mean_pairwise_within(unit: np.ndarray) -> float | None:
    n = unit.shape[0]
    if n < 2:
        return None
    sims = unit @ unit.T
    upper = sims[np.triu_indices(n, k=1)]
    return float(upper.mean())


def cohesion_metrics(
    frames: Sequence[FrameEmbedding] | np.ndarray,
    segments: Sequence[EventSegment | Span],
) -> dict:
    """Mean pairwise cosine within segments vs between adjacent segments.

    ``mean_intra_similarity`` averages the per-segment mean pairwise cosine
    over segments with at least two frames (single-frame segments have no
    pairs to score). ``mean_inter_similarity`` averages, over adjacent
    segment pairs, the mean pairwise cosine between their frames; it is None
    for fewer than two segments. ``gap`` is intra minus inter.
    """
    unit = _unit_matrix(frames)
    spans = segments_to_spans(segments)

    intra_values = []
    for start, end in spans:
        value = _mean_pairwise_within(unit[start : end + 1])
        if value is not None:
            intra_values.append(value)
    intra = float(np.mean(intra_values)) if intra_values else None

    inter = None
    if len(spans) >= 2:
        inter_values = []
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            cross = unit[s1 : e1 + 1] @ unit[s2 : e2 + 1].T
            inter_values.append(float(cross.mean()))
        inter = float(np.mean(inter_values))

    gap = (intra - inter) if intra is not None and inter is not None else None
    return {
        "mean_intra_similarity": intra,
        "mean_inter_similarity": inter,
        "gap": gap,
    }
