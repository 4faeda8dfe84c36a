"""Causal streaming segmentation engine.

One engine instance consumes one embedding stream frame by frame and
maintains, per hierarchy level, an open context of tokens accumulated since
the last boundary at that level (windowed to the most recent ``window_cap``
tokens). Each incoming atom - the normalized frame at level 1, a promoted
summary token at higher levels - is compared against the prediction standing
at its level; a cosine distance strictly above the level threshold closes the
open context as a finalized segment, starts a new context with the arriving
atom, and promotes the closed segment's summary token one level up, where the
same check recurses within the same ingest call. The top level accumulates
segments without promoting further.

The engine never looks at future frames and uses no randomness, so emitted
segments for a stream prefix are invariant to whatever follows. With
``retain_segments=False`` finalized segments are only handed to the sink and
per-level counters, keeping memory at O(levels * window_cap * dim) for
arbitrarily long streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .embs import normalize_frame
from .errors import ConfigError, SequenceError, StreamFormatError
from .predictors import (
    PredictorConfig,
    PredictorState,
    _mlp_forward,
    online_update,
    predict_next,
)
from .types import EventHierarchy, EventSegment, FrameEmbedding, LatentToken

_DEGENERATE_NORM = 1e-12


def detect_boundary(error: float, threshold: float) -> bool:
    """Strict comparison: equality continues the open event."""
    return error > threshold


@dataclass
class EngineConfig:
    """Segmentation knobs. ``thresholds`` and ``window_cap`` accept a scalar
    (shared across levels) or one value per level."""

    dim: int
    levels: int = 3
    thresholds: float | Sequence[float] = 0.4
    window_cap: int | Sequence[int] = 32
    predictor: PredictorConfig | None = None
    online_learning: bool = False

    threshold_list: tuple[float, ...] = field(init=False)
    window_caps: tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.levels < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        thr = self.thresholds
        thr_list = tuple(float(t) for t in (thr if isinstance(thr, (list, tuple)) else [thr] * self.levels))
        if len(thr_list) != self.levels:
            raise ConfigError(
                f"expected {self.levels} thresholds, got {len(thr_list)}"
            )
        for t in thr_list:
            if not 0.0 < t <= 2.0:
                raise ConfigError(f"threshold {t} outside (0, 2]")
        self.threshold_list = thr_list
        cap = self.window_cap
        caps = tuple(int(c) for c in (cap if isinstance(cap, (list, tuple)) else [cap] * self.levels))
        if len(caps) != self.levels:
            raise ConfigError(f"expected {self.levels} window caps, got {len(caps)}")
        for c in caps:
            if c < 1:
                raise ConfigError(f"window cap {c} must be >= 1")
        self.window_caps = caps
        if self.predictor is None:
            self.predictor = PredictorConfig(
                kind="mean_pool_identity",
                dim=self.dim,
                levels=self.levels,
                window_cap=max(caps),
            )
        if self.predictor.dim != self.dim:
            raise ConfigError(
                f"predictor dim {self.predictor.dim} != engine dim {self.dim}"
            )
        if self.predictor.levels < self.levels:
            raise ConfigError(
                f"predictor covers {self.predictor.levels} levels, engine needs {self.levels}"
            )


class _LevelState:
    """Open-context bookkeeping for one level."""

    __slots__ = (
        "level",
        "cap",
        "window",
        "vec_sum",
        "open_count",
        "start_ord",
        "start_frame",
        "last_time",
        "peak_error",
        "peak_ord",
        "peak_token",
        "next_ord",
        "latent",
        "prediction",
        "pred_norm",
        "pred_inputs",
    )

    def __init__(self, level: int, cap: int) -> None:
        self.level = level
        self.cap = cap
        self.window: list[LatentToken] = []
        self.vec_sum: np.ndarray | None = None
        self.open_count = 0  # tokens in the open segment, including evicted ones
        self.start_ord = 0
        self.start_frame = 0
        self.last_time = -1
        self.peak_error = -1.0
        self.peak_ord = 0
        self.peak_token: LatentToken | None = None
        self.next_ord = 0  # level-wide token ordinal counter
        self.latent: np.ndarray | None = None
        self.prediction: np.ndarray | None = None
        self.pred_norm = 0.0
        self.pred_inputs: tuple[np.ndarray, ...] = ()

    @property
    def empty(self) -> bool:
        return self.open_count == 0

    def _track_peak(self, token: LatentToken, ordinal: int) -> None:
        if token.error > self.peak_error:  # strict: ties keep the earliest
            self.peak_error = token.error
            self.peak_ord = ordinal
            self.peak_token = token

    def open_with(self, token: LatentToken) -> None:
        self.window = [token]
        self.vec_sum = token.vector.copy()
        self.open_count = 1
        self.start_ord = self.next_ord
        self.start_frame = token.start_time
        self.last_time = token.time
        self.peak_error = token.error
        self.peak_ord = self.next_ord
        self.peak_token = token
        self.next_ord += 1

    def append(self, token: LatentToken) -> None:
        self.window.append(token)
        assert self.vec_sum is not None
        self.vec_sum = self.vec_sum + token.vector
        if len(self.window) > self.cap:
            evicted = self.window.pop(0)
            self.vec_sum = self.vec_sum - evicted.vector
        self.open_count += 1
        self.last_time = token.time
        self._track_peak(token, self.next_ord)
        self.next_ord += 1

    def window_mean(self) -> np.ndarray:
        assert self.vec_sum is not None
        return self.vec_sum / len(self.window)

    def close(self, *, provisional: bool, summary: np.ndarray) -> EventSegment:
        assert self.peak_token is not None
        return EventSegment(
            level=self.level,
            start=self.start_ord,
            end=self.next_ord - 1,
            tokens=tuple(self.window),
            essential_index=self.peak_ord,
            summary=summary,
            start_frame=self.start_frame,
            end_frame=self.last_time,
            essential_frame=self.peak_token.anchor_time,
            peak_error=self.peak_error,
            finalized=True,
            provisional=provisional,
        )

    def clone(self) -> "_LevelState":
        other = _LevelState(self.level, self.cap)
        other.window = list(self.window)
        other.vec_sum = None if self.vec_sum is None else self.vec_sum.copy()
        other.open_count = self.open_count
        other.start_ord = self.start_ord
        other.start_frame = self.start_frame
        other.last_time = self.last_time
        other.peak_error = self.peak_error
        other.peak_ord = self.peak_ord
        other.peak_token = self.peak_token
        other.next_ord = self.next_ord
        other.latent = self.latent
        other.prediction = self.prediction
        other.pred_norm = self.pred_norm
        other.pred_inputs = self.pred_inputs
        return other


class EventEngine:
    """Stateful, strictly sequential segmenter for one stream.

    Independent instances may run in parallel; a single instance must not be
    shared between threads.
    """

    def __init__(
        self,
        config: EngineConfig,
        *,
        predictor_state: PredictorState | None = None,
        sink: Callable[[EventSegment], None] | None = None,
        retain_segments: bool = True,
    ) -> None:
        self.config = config
        self.predictor = predictor_state or PredictorState.initialize(config.predictor)
        if self.predictor.config.dim != config.dim:
            raise ConfigError("predictor state dim does not match engine dim")
        self._sink = sink
        self._retain = retain_segments
        self._levels = [_LevelState(l, config.window_caps[l - 1]) for l in range(1, config.levels + 1)]
        self._finalized: dict[int, list[EventSegment]] = {l: [] for l in range(1, config.levels + 1)}
        self._seg_count = [0] * config.levels
        self._tok_count = [0] * config.levels
        self._frame_cover = [0] * config.levels
        self._clock = 0
        self._identity_kind = self.predictor.config.kind == "mean_pool_identity"

    @property
    def clock(self) -> int:
        return self._clock

    @property
    def predictor_state(self) -> PredictorState:
        return self.predictor

    def open_context(self, level: int) -> tuple[LatentToken, ...]:
        return tuple(self._levels[level - 1].window)

    def current_latent(self, level: int) -> np.ndarray | None:
        return self._levels[level - 1].latent

    def finalized_segments(self, level: int) -> list[EventSegment]:
        return list(self._finalized[level])

    # -- ingest ----------------------------------------------------------

    def ingest(self, frame: FrameEmbedding) -> list[EventSegment]:
        """Advance the clock by one frame; returns segments finalized now."""
        if frame.index != self._clock:
            raise SequenceError(
                f"out-of-order frame: expected index {self._clock}, got {frame.index}"
            )
        if frame.vector.shape[0] != self.config.dim:
            raise StreamFormatError(
                f"frame {frame.index} has dim {frame.vector.shape[0]}, engine expects {self.config.dim}"
            )
        vec = normalize_frame(frame.vector)
        emitted: list[EventSegment] = []
        atom = LatentToken(level=1, time=frame.index, vector=vec)
        lvl = 1
        while True:
            ls = self._levels[lvl - 1]
            promoted: LatentToken | None = None
            if ls.empty:
                ls.open_with(atom)
            else:
                err = self._error_against_prediction(ls, atom.vector)
                atom = replace(atom, error=err)
                if self.config.online_learning:
                    online_update(lvl, ls.pred_inputs, atom.vector, self.predictor)
                if detect_boundary(err, self.config.threshold_list[lvl - 1]):
                    seg = ls.close(provisional=False, summary=ls.latent)
                    self._record(seg)
                    emitted.append(seg)
                    if lvl < self.config.levels:
                        promoted = LatentToken(
                            level=lvl + 1,
                            time=seg.end_frame,
                            start_time=seg.start_frame,
                            anchor_time=seg.essential_frame,
                            vector=seg.summary,
                        )
                    ls.open_with(atom)
                else:
                    ls.append(atom)
            self._refresh(lvl)
            if promoted is None:
                break
            atom = promoted
            lvl += 1
        self._clock += 1
        return emitted

    def ingest_vector(self, vector: np.ndarray) -> list[EventSegment]:
        """Convenience wrapper stamping the next frame index."""
        return self.ingest(FrameEmbedding(index=self._clock, vector=vector))

    def _error_against_prediction(self, ls: _LevelState, actual: np.ndarray) -> float:
        # A degenerate (near-zero) summary carries no direction: treat the
        # comparison as maximal surprise rather than failing mid-stream.
        a_norm = float(np.linalg.norm(actual))
        if ls.pred_norm < _DEGENERATE_NORM or a_norm < _DEGENERATE_NORM:
            return 2.0
        assert ls.prediction is not None
        cos = float(np.dot(ls.prediction, actual) / (ls.pred_norm * a_norm))
        cos = min(1.0, max(-1.0, cos))
        return 1.0 - cos

    def _refresh(self, lvl: int) -> None:
        ls = self._levels[lvl - 1]
        mean = ls.window_mean()
        if self.predictor.config.kind == "mlp":
            ls.latent = _mlp_forward(self.predictor.phi[lvl - 1], mean)
        else:
            ls.latent = mean
        ls.pred_inputs = tuple(self._levels[i].latent for i in range(lvl))  # type: ignore[misc]
        if self._identity_kind:
            ls.prediction = ls.latent
        else:
            ls.prediction = predict_next(lvl, ls.pred_inputs, self.predictor)
        ls.pred_norm = float(np.linalg.norm(ls.prediction))

    def _record(self, seg: EventSegment) -> None:
        idx = seg.level - 1
        self._seg_count[idx] += 1
        self._tok_count[idx] += len(seg)
        self._frame_cover[idx] += seg.frame_count
        if self._retain:
            self._finalized[seg.level].append(seg)
        if self._sink is not None:
            self._sink(seg)

    # -- flush -----------------------------------------------------------

    def flush(self) -> EventHierarchy:
        """Close every open context as a provisional segment, promoting
        summaries upward, without mutating the live state. Ingestion can
        continue afterwards as if flush never happened."""
        h = EventHierarchy(depth=self.config.levels)
        if self._retain:
            for lvl in range(1, self.config.levels + 1):
                h.levels[lvl] = list(self._finalized[lvl])
        carry: LatentToken | None = None
        for lvl in range(1, self.config.levels + 1):
            ls = self._levels[lvl - 1].clone()
            if carry is not None:
                err = 0.0
                if not ls.empty and ls.prediction is not None:
                    err = self._error_against_prediction(ls, carry.vector)
                carry = replace(carry, error=err)
                if ls.empty:
                    ls.open_with(carry)
                else:
                    ls.append(carry)
                mean = ls.window_mean()
                if self.predictor.config.kind == "mlp":
                    ls.latent = _mlp_forward(self.predictor.phi[lvl - 1], mean)
                else:
                    ls.latent = mean
            if ls.empty:
                carry = None
                continue
            seg = ls.close(provisional=True, summary=ls.latent)
            h.levels[lvl].append(seg)
            if lvl < self.config.levels:
                carry = LatentToken(
                    level=lvl + 1,
                    time=seg.end_frame,
                    start_time=seg.start_frame,
                    anchor_time=seg.essential_frame,
                    vector=seg.summary,
                )
            else:
                carry = None
        return h

    # -- statistics ------------------------------------------------------

    def running_stats(self, flushed: EventHierarchy | None = None) -> dict:
        """Stats from the running counters plus, optionally, the provisional
        segments of a flush result; works in spill mode where the full
        hierarchy is never retained."""
        levels = self.config.levels
        seg_counts = list(self._seg_count)
        tok_counts = list(self._tok_count)
        frame_cover = list(self._frame_cover)
        if flushed is not None:
            for lvl in range(1, levels + 1):
                for seg in flushed.segments(lvl):
                    if seg.provisional:
                        seg_counts[lvl - 1] += 1
                        tok_counts[lvl - 1] += len(seg)
                        frame_cover[lvl - 1] += seg.frame_count
        return _stats_from_counts(levels, self._clock, seg_counts, tok_counts, frame_cover)


def _stats_from_counts(
    levels: int,
    frames: int,
    seg_counts: list[int],
    tok_counts: list[int],
    frame_cover: list[int],
) -> dict:
    mean_frames: dict[int, float | None] = {}
    for lvl in range(1, levels + 1):
        n = seg_counts[lvl - 1]
        mean_frames[lvl] = (frame_cover[lvl - 1] / n) if n else None
    top = seg_counts[levels - 1]
    return {
        "frames": frames,
        "segment_counts": {lvl: seg_counts[lvl - 1] for lvl in range(1, levels + 1)},
        "token_counts": {lvl: tok_counts[lvl - 1] for lvl in range(1, levels + 1)},
        "mean_segment_frames": mean_frames,
        "compression_ratio": (frames / top) if top and frames else None,
    }


def hierarchy_stats(h: EventHierarchy) -> dict:
    """Per-level segment/token counts, mean segment length in frames, and the
    frames-per-top-event compression ratio. Pure function of the hierarchy."""
    levels = h.depth
    seg_counts = [len(h.segments(lvl)) for lvl in range(1, levels + 1)]
    tok_counts = [h.token_count(lvl) for lvl in range(1, levels + 1)]
    frame_cover = [sum(s.frame_count for s in h.segments(lvl)) for lvl in range(1, levels + 1)]
    frames = frame_cover[0] if levels >= 1 else 0
    return _stats_from_counts(levels, frames, seg_counts, tok_counts, frame_cover)
