"""Bottom-up event consolidation.

For each top-level event the hierarchy is reduced to three vectors:

* ``abstract`` - recursive attention summary of the event's subtree. Leaf
  (level-1) segments are summarized by single-query attention where the
  segment's essential token (peak recorded prediction error, earliest on
  ties) queries the remaining tokens; each higher segment then queries its
  children's summaries with its own essential token.
* ``coarse`` - arithmetic mean of the event's top-level tokens.
* ``fine`` - the top-level token with the highest recorded error, returned
  bit-identical.

All operations are pure functions of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .types import EventHierarchy, EventSegment, EventSummary

ESSENTIAL_STRATEGIES = ("max_error", "random", "middle")


@dataclass(frozen=True)
class AttentionConfig:
    """Single-query attention settings. ``scale`` defaults to 1/sqrt(d) at
    call time when left as None; projections default to identity, or supply
    d x d query/key/value matrices."""

    scale: float | None = None
    wq: np.ndarray | None = None
    wk: np.ndarray | None = None
    wv: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.scale is not None and self.scale <= 0:
            raise ConfigError(f"attention scale must be > 0, got {self.scale}")
        for name in ("wq", "wk", "wv"):
            mat = getattr(self, name)
            if mat is None:
                continue
            mat = np.asarray(mat, dtype=np.float64)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ConfigError(f"{name} must be square, got shape {mat.shape}")
            if not np.all(np.isfinite(mat)):
                raise ConfigError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, mat)

    def effective_scale(self, dim: int) -> float:
        return self.scale if self.scale is not None else 1.0 / np.sqrt(dim)


@dataclass(frozen=True)
class ConsolidationResult:
    summaries: tuple[EventSummary, ...]
    provenance: tuple[dict, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.summaries)


def attention_weights(
    query: np.ndarray,
    keys: Sequence[np.ndarray],
    cfg: AttentionConfig | None = None,
) -> np.ndarray:
    """Softmax weights over keys for a single query; exposed for testing the
    probability-simplex invariant."""
    cfg = cfg or AttentionConfig()
    q = np.asarray(query, dtype=np.float64)
    k = np.stack([np.asarray(x, dtype=np.float64) for x in keys])
    if cfg.wq is not None:
        q = cfg.wq @ q
    if cfg.wk is not None:
        k = k @ cfg.wk.T
    logits = cfg.effective_scale(q.shape[0]) * (k @ q)
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def cross_attention(
    query: np.ndarray,
    keys: Sequence[np.ndarray],
    values: Sequence[np.ndarray],
    cfg: AttentionConfig | None = None,
) -> np.ndarray:
    """Single-query scaled dot-product attention over keys/values."""
    if len(keys) == 0:
        raise ValueError("cross_attention: empty key set")
    if len(keys) != len(values):
        raise ValueError(f"cross_attention: {len(keys)} keys vs {len(values)} values")
    cfg = cfg or AttentionConfig()
    q = np.asarray(query, dtype=np.float64)
    dims = {q.shape[0]} | {np.asarray(k).shape[0] for k in keys} | {np.asarray(v).shape[0] for v in values}
    if len(dims) != 1:
        raise ValueError(f"cross_attention: mixed dimensions {sorted(dims)}")
    w = attention_weights(q, keys, cfg)
    v = np.stack([np.asarray(x, dtype=np.float64) for x in values])
    if cfg.wv is not None:
        v = v @ cfg.wv.T
    return w @ v


def select_essential(
    segment: EventSegment,
    *,
    strategy: str = "max_error",
    rng: np.random.Generator | None = None,
) -> int:
    """Index (within the retained tokens) of the segment's essential token.

    The default picks the maximal recorded prediction error, earliest on
    ties. ``random`` and ``middle`` exist for selection-strategy comparisons
    only.
    """
    n = len(segment.tokens)
    if n == 0:
        raise ValueError("select_essential: empty segment")
    if strategy == "max_error":
        errors = [t.error for t in segment.tokens]
        best = 0
        for i, e in enumerate(errors):
            if e > errors[best]:
                best = i
        return best
    if strategy == "middle":
        return (n - 1) // 2
    if strategy == "random":
        if rng is None:
            raise ValueError("select_essential: random strategy needs an rng")
        return int(rng.integers(0, n))
    raise ConfigError(f"unknown essential strategy {strategy!r}, expected one of {ESSENTIAL_STRATEGIES}")


def intra_layer_aggregate(
    segment: EventSegment,
    cfg: AttentionConfig | None = None,
    *,
    strategy: str = "max_error",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Essential token queries the segment's remaining tokens. A single-token
    segment has no remaining tokens and passes through unchanged."""
    if len(segment.tokens) == 0:
        raise ValueError("intra_layer_aggregate: empty segment")
    ess = select_essential(segment, strategy=strategy, rng=rng)
    if len(segment.tokens) == 1:
        return segment.tokens[0].vector
    query = segment.tokens[ess].vector
    rest = [t.vector for i, t in enumerate(segment.tokens) if i != ess]
    return cross_attention(query, rest, rest, cfg)


def cross_layer_aggregate(
    essential_upper: np.ndarray,
    summaries_lower: Sequence[np.ndarray],
    cfg: AttentionConfig | None = None,
) -> np.ndarray:
    """Upper essential token queries the lower level's summaries."""
    if len(summaries_lower) == 0:
        raise ValueError("cross_layer_aggregate: empty lower summary set")
    return cross_attention(essential_upper, summaries_lower, summaries_lower, cfg)


def _subtree_summary(
    hierarchy: EventHierarchy,
    segment: EventSegment,
    cfg: AttentionConfig | None,
    strategy: str,
    rng: np.random.Generator | None,
    provenance: list[dict],
) -> np.ndarray:
    ess = select_essential(segment, strategy=strategy, rng=rng)
    provenance.append(
        {
            "level": segment.level,
            "token_ordinal": segment.start + ess,
            "anchor_frame": segment.tokens[ess].anchor_time,
        }
    )
    if segment.level == 1:
        if len(segment.tokens) == 1:
            return segment.tokens[0].vector
        query = segment.tokens[ess].vector
        rest = [t.vector for i, t in enumerate(segment.tokens) if i != ess]
        return cross_attention(query, rest, rest, cfg)
    children = hierarchy.children_of(segment)
    if len(children) != len(segment.tokens):
        raise ValueError(
            f"hierarchy inconsistent: level-{segment.level} segment "
            f"[{segment.start_frame}, {segment.end_frame}] has {len(segment.tokens)} tokens "
            f"but {len(children)} child segments"
        )
    child_summaries = [
        _subtree_summary(hierarchy, child, cfg, strategy, rng, provenance) for child in children
    ]
    return cross_layer_aggregate(segment.tokens[ess].vector, child_summaries, cfg)


def consolidate_event(
    hierarchy: EventHierarchy,
    top_event: EventSegment,
    cfg: AttentionConfig | None = None,
    *,
    strategy: str = "max_error",
    rng: np.random.Generator | None = None,
) -> EventSummary:
    """Reduce one top-level event to its (abstract, coarse, fine) triple."""
    if not top_event.finalized:
        raise ValueError("consolidate_event: segment is not finalized")
    if top_event.level != hierarchy.depth:
        raise ValueError(
            f"consolidate_event: segment level {top_event.level} is not the top level {hierarchy.depth}"
        )
    if not any(top_event is s for s in hierarchy.segments(hierarchy.depth)):
        raise ValueError("consolidate_event: segment not part of the hierarchy")
    provenance: list[dict] = []
    abstract = _subtree_summary(hierarchy, top_event, cfg, strategy, rng, provenance)
    coarse = np.mean([t.vector for t in top_event.tokens], axis=0)
    fine_idx = select_essential(top_event)
    fine = top_event.tokens[fine_idx].vector
    return EventSummary(
        abstract=abstract,
        coarse=coarse,
        fine=fine,
        event_span=(top_event.start_frame, top_event.end_frame),
    )


def consolidate_all(
    hierarchy: EventHierarchy,
    cfg: AttentionConfig | None = None,
    *,
    strategy: str = "max_error",
    seed: int = 0,
) -> ConsolidationResult:
    """Consolidate every top-level event in temporal order (3 vectors each)."""
    rng = np.random.default_rng(seed) if strategy == "random" else None
    summaries: list[EventSummary] = []
    provenances: list[dict] = []
    for top in hierarchy.top_segments():
        provenance: list[dict] = []
        abstract = _subtree_summary(hierarchy, top, cfg, strategy, rng, provenance)
        coarse = np.mean([t.vector for t in top.tokens], axis=0)
        fine_idx = select_essential(top)
        summaries.append(
            EventSummary(
                abstract=abstract,
                coarse=coarse,
                fine=top.tokens[fine_idx].vector,
                event_span=(top.start_frame, top.end_frame),
            )
        )
        provenances.append(
            {
                "event_span": [top.start_frame, top.end_frame],
                "essential_frames": sorted({p["anchor_frame"] for p in provenance}),
                "selections": provenance,
            }
        )
    return ConsolidationResult(summaries=tuple(summaries), provenance=tuple(provenances))


def cosine_matrix(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Pairwise cosine similarity matrix; display/analysis helper."""
    m = np.stack([np.asarray(v, dtype=np.float64) for v in vectors])
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    norms = np.where(norms < 1e-12, 1.0, norms)
    unit = m / norms
    return unit @ unit.T
