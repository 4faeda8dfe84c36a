"""Core domain types for embedding streams and the event hierarchy.

All vector payloads are numpy float64 arrays that are frozen (read-only)
after construction, so instances can be shared freely between threads.
Frame and level indices are 0-based throughout; hierarchy levels are
1-based (level 1 is the frame-granular level).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import StreamFormatError


def _frozen(vector: np.ndarray | Sequence[float]) -> np.ndarray:
    arr = np.asarray(vector, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {arr.shape}")
    arr = arr.copy() if arr.flags.writeable else arr
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FrameEmbedding:
    """One frame of the input stream: ordinal time step plus feature vector."""

    index: int
    vector: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "vector", _frozen(self.vector))
        if self.index < 0:
            raise ValueError(f"frame index must be non-negative, got {self.index}")

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


@dataclass(frozen=True)
class StreamHeader:
    """Stream-level metadata. ``frame_count=None`` marks an unbounded stream
    (wire sentinel 0); ``fps_hint`` is an optional (num, den) rational."""

    dim: int
    frame_count: int | None = None
    fps_hint: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise StreamFormatError(f"dim must be >= 1, got {self.dim}")
        if self.frame_count is not None and self.frame_count < 0:
            raise StreamFormatError("frame_count must be non-negative")
        # 0 has no bounded representation on the wire; normalize to unbounded.
        if self.frame_count == 0:
            object.__setattr__(self, "frame_count", None)
        if self.fps_hint is not None:
            num, den = self.fps_hint
            if num <= 0 or den <= 0:
                raise StreamFormatError(f"fps_hint must be a positive rational, got {self.fps_hint}")


@dataclass(frozen=True, eq=False)
class LatentToken:
    """One node payload in the event hierarchy.

    ``time`` is the last source frame the token covers, ``start_time`` the
    first; ``anchor_time`` is the salient source frame the token drills down
    to (for a frame-level token, all three coincide). ``error`` is the
    prediction error recorded when the token was compared against the
    prediction standing at its level, 0.0 when no prediction existed yet.
    """

    level: int
    time: int
    vector: np.ndarray
    error: float = 0.0
    start_time: int | None = None
    anchor_time: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "vector", _frozen(self.vector))
        if self.start_time is None:
            object.__setattr__(self, "start_time", self.time)
        if self.anchor_time is None:
            object.__setattr__(self, "anchor_time", self.time)
        if not 0.0 <= self.error <= 2.0:
            raise ValueError(f"recorded error must lie in [0, 2], got {self.error}")
        if self.level < 1:
            raise ValueError(f"level must be >= 1, got {self.level}")


@dataclass(frozen=True, eq=False)
class EventSegment:
    """A contiguous token span at one level, closed by a boundary or a flush.

    ``start``/``end`` are inclusive token ordinals in the level's token
    stream; ``tokens`` holds the retained tokens of that span (the most
    recent ``window_cap`` of them when an event outlived the context window).
    ``provisional`` marks segments closed by a flush rather than a detected
    boundary. Instances are immutable once constructed.
    """

    level: int
    start: int
    end: int
    tokens: tuple[LatentToken, ...]
    essential_index: int
    summary: np.ndarray
    start_frame: int
    end_frame: int
    essential_frame: int
    peak_error: float
    finalized: bool = True
    provisional: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "summary", _frozen(self.summary))
        if not self.start <= self.essential_index <= self.end:
            raise ValueError(
                f"essential index {self.essential_index} outside span [{self.start}, {self.end}]"
            )
        times = [t.time for t in self.tokens]
        if any(a >= b for a, b in zip(times, times[1:])):
            raise ValueError("segment tokens must be in strictly increasing time order")

    def __len__(self) -> int:
        return self.end - self.start + 1

    @property
    def frame_count(self) -> int:
        return self.end_frame - self.start_frame + 1


@dataclass
class EventHierarchy:
    """Per-level ordered lists of finalized segments, levels 1..depth."""

    depth: int
    levels: dict[int, list[EventSegment]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for lvl in range(1, self.depth + 1):
            self.levels.setdefault(lvl, [])

    def segments(self, level: int) -> list[EventSegment]:
        return self.levels.get(level, [])

    def top_segments(self) -> list[EventSegment]:
        return sorted(self.segments(self.depth), key=lambda s: s.start_frame)

    def all_segments(self) -> Iterator[EventSegment]:
        for lvl in range(1, self.depth + 1):
            yield from self.levels.get(lvl, [])

    def token_count(self, level: int) -> int:
        return sum(len(s) for s in self.segments(level))

    def children_of(self, segment: EventSegment) -> list[EventSegment]:
        """Child segments one level down whose frame spans nest inside."""
        if segment.level <= 1:
            return []
        kids = [
            s
            for s in self.segments(segment.level - 1)
            if s.start_frame >= segment.start_frame and s.end_frame <= segment.end_frame
        ]
        kids.sort(key=lambda s: s.start_frame)
        return kids


@dataclass(frozen=True, eq=False)
class EventSummary:
    """Per-event output triple: attention summary, token mean, peak-error token."""

    abstract: np.ndarray
    coarse: np.ndarray
    fine: np.ndarray
    event_span: tuple[int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "abstract", _frozen(self.abstract))
        object.__setattr__(self, "coarse", _frozen(self.coarse))
        # fine is a selection of an existing token vector: keep the exact array
        # so bit-identity with the source token is preserved.
        if not isinstance(self.fine, np.ndarray):
            object.__setattr__(self, "fine", _frozen(self.fine))
        for name in ("abstract", "coarse", "fine"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} embedding contains non-finite components")
