"""Reference offline segmenters to compare the streaming engine against.

Both return contiguous inclusive frame spans. The cluster segmenter is
deliberately non-causal: it clusters the whole stream at once and only then
converts label runs into segments. The threshold segmenter is causal but
judges each step from adjacent-frame similarity alone.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ConfigError
from .types import FrameEmbedding

Span = tuple[int, int]


def _as_matrix(frames: Sequence[FrameEmbedding] | np.ndarray) -> np.ndarray:
    if isinstance(frames, np.ndarray):
        return np.asarray(frames, dtype=np.float64)
    return np.stack([f.vector for f in frames])


def kmeans(
    data: np.ndarray, k: int, seed: int = 0, max_iter: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """Plain k-means with k-means++ seeding; returns (labels, centroids)."""
    n = data.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, data.shape[1]), dtype=np.float64)
    centroids[0] = data[rng.integers(n)]
    dist2 = np.sum((data - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = dist2.sum()
        if total <= 0:
            centroids[i] = data[rng.integers(n)]
        else:
            centroids[i] = data[rng.choice(n, p=dist2 / total)]
        dist2 = np.minimum(dist2, np.sum((data - centroids[i]) ** 2, axis=1))

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        distances = np.sum((data[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(distances, axis=1)
        for c in range(k):
            member = new_labels == c
            if member.any():
                centroids[c] = data[member].mean(axis=0)
            # empty clusters keep their previous centroid
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return labels, centroids


def runs_to_spans(labels: Sequence[int]) -> list[Span]:
    """Maximal runs of identical labels as inclusive spans."""
    spans: list[Span] = []
    start = 0
    for i in range(1, len(labels)):
        if labels[i] != labels[i - 1]:
            spans.append((start, i - 1))
            start = i
    if len(labels) > 0:
        spans.append((start, len(labels) - 1))
    return spans


def baseline_cluster_segment(
    frames: Sequence[FrameEmbedding] | np.ndarray, k: int, seed: int = 0
) -> list[Span]:
    """Offline: cluster all frames, then split on label changes. Temporal
    order plays no role in the grouping, so interleaved content yields
    many short runs."""
    data = _as_matrix(frames)
    labels, _ = kmeans(data, k, seed=seed)
    return runs_to_spans(labels.tolist())


def baseline_threshold_segment(
    frames: Sequence[FrameEmbedding] | np.ndarray, sim_threshold: float
) -> list[Span]:
    """Causal scan: a boundary fires between t and t+1 whenever
    cos(v_t, v_t+1) drops below the threshold."""
    if not -1.0 <= sim_threshold <= 1.0:
        raise ConfigError(f"sim_threshold must lie in [-1, 1], got {sim_threshold}")
    data = _as_matrix(frames)
    n = data.shape[0]
    if n == 0:
        return []
    norms = np.linalg.norm(data, axis=1)
    norms = np.where(norms < 1e-12, 1.0, norms)
    unit = data / norms[:, None]
    adjacent = np.sum(unit[:-1] * unit[1:], axis=1)
    spans: list[Span] = []
    start = 0
    for t in range(n - 1):
        if adjacent[t] < sim_threshold:
            spans.append((start, t))
            start = t + 1
    spans.append((start, n - 1))
    return spans
