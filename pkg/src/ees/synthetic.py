"""Synthetic embedding streams with planted segment structure.

Each stream is a concatenation of scenes; a scene's frames are drawn as
``unit_normalize(centroid + drift_rate * offset * drift_direction + gaussian
noise)``. ``noise_sigma`` sets the expected Euclidean norm of the noise
vector (per-component std is sigma/sqrt(dim)), so a given sigma perturbs
unit-norm centroids by the same relative amount at any dimension. Scene
centroids are drawn uniformly on the unit sphere and rejection-sampled until
every pair's cosine stays at or below ``max_centroid_cos``, so planted
scenes are guaranteed to be separable. Generation is fully determined by the
spec seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .types import FrameEmbedding

_REJECTION_LIMIT = 10_000


@dataclass(frozen=True)
class SegmentSpec:
    """One planted scene: length in frames, optional explicit centroid or a
    dedicated centroid seed, plus per-scene noise and drift. The drift
    direction is drawn per scene unless given explicitly (explicit directions
    let a scene drift toward a specific target, e.g. the next centroid)."""

    length: int
    centroid: tuple[float, ...] | None = None
    centroid_seed: int | None = None
    noise_sigma: float = 0.0
    drift_rate: float = 0.0
    drift_direction: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ConfigError(f"segment length must be >= 1, got {self.length}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.drift_rate < 0:
            raise ConfigError(f"drift_rate must be >= 0, got {self.drift_rate}")


@dataclass(frozen=True)
class SynthSpec:
    dim: int
    segments: tuple[SegmentSpec, ...]
    seed: int = 0
    max_centroid_cos: float = 0.2

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if not self.segments:
            raise ConfigError("spec needs at least one segment")
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def total_frames(self) -> int:
        return sum(s.length for s in self.segments)


@dataclass(frozen=True)
class GroundTruth:
    """Frame ordinals where a new planted scene begins (the first scene's
    start is not a boundary) plus per-frame scene labels."""

    boundary_frames: tuple[int, ...]
    segment_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        bounds = tuple(self.boundary_frames)
        if any(a >= b for a, b in zip(bounds, bounds[1:])):
            raise ConfigError("boundary frames must be strictly increasing")
        if bounds and bounds[-1] >= len(self.segment_ids):
            raise ConfigError("boundary frame beyond stream length")
        object.__setattr__(self, "boundary_frames", bounds)
        object.__setattr__(self, "segment_ids", tuple(self.segment_ids))


def _unit_sphere(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    norm = np.linalg.norm(v)
    while norm < 1e-12:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
    return v / norm


def _draw_centroids(spec: SynthSpec, rng: np.random.Generator) -> list[np.ndarray]:
    placed: dict[int, np.ndarray] = {}
    for i, seg in enumerate(spec.segments):
        if seg.centroid is not None:
            c = np.asarray(seg.centroid, dtype=np.float64)
            if c.shape != (spec.dim,):
                raise ConfigError(f"explicit centroid has shape {c.shape}, expected ({spec.dim},)")
            placed[i] = c / np.linalg.norm(c)
    for i, seg in enumerate(spec.segments):
        if i in placed:
            continue
        seg_rng = np.random.default_rng(seg.centroid_seed) if seg.centroid_seed is not None else rng
        for attempt in range(_REJECTION_LIMIT + 1):
            if attempt == _REJECTION_LIMIT:
                raise ConfigError(
                    f"could not draw a centroid with pairwise cos <= {spec.max_centroid_cos} "
                    f"after {_REJECTION_LIMIT} rejections"
                )
            candidate = _unit_sphere(seg_rng, spec.dim)
            if all(float(candidate @ other) <= spec.max_centroid_cos for other in placed.values()):
                placed[i] = candidate
                break
    return [placed[i] for i in range(len(spec.segments))]


def generate_stream(spec: SynthSpec) -> tuple[list[FrameEmbedding], GroundTruth]:
    """Materialize the stream and its planted boundaries."""
    rng = np.random.default_rng(spec.seed)
    centroids = _draw_centroids(spec, rng)

    frames: list[FrameEmbedding] = []
    labels: list[int] = []
    boundaries: list[int] = []
    t = 0
    for seg_id, (seg, centroid) in enumerate(zip(spec.segments, centroids)):
        if seg_id > 0:
            boundaries.append(t)
        drift_dir = _unit_sphere(rng, spec.dim)
        if seg.drift_direction is not None:
            explicit = np.asarray(seg.drift_direction, dtype=np.float64)
            if explicit.shape != (spec.dim,):
                raise ConfigError(
                    f"drift_direction has shape {explicit.shape}, expected ({spec.dim},)"
                )
            drift_dir = explicit / np.linalg.norm(explicit)
        component_std = seg.noise_sigma / np.sqrt(spec.dim)
        for offset in range(seg.length):
            v = centroid + seg.drift_rate * offset * drift_dir
            if seg.noise_sigma > 0:
                v = v + rng.normal(0.0, component_std, size=spec.dim)
            norm = np.linalg.norm(v)
            if norm < 1e-12:
                v = centroid
                norm = 1.0
            frames.append(FrameEmbedding(index=t, vector=v / norm))
            labels.append(seg_id)
            t += 1
    return frames, GroundTruth(boundary_frames=tuple(boundaries), segment_ids=tuple(labels))


@dataclass(frozen=True)
class NestedTruth:
    """Scene- and chapter-level boundaries for nested streams."""

    scene_boundaries: tuple[int, ...]
    chapter_boundaries: tuple[int, ...]


def nested_synth_spec(
    dim: int,
    chapters: Sequence[Sequence[int]],
    seed: int = 0,
    *,
    noise_sigma: float = 0.05,
    drift_rate: float = 0.0,
    scene_jitter: float = 0.35,
    max_centroid_cos: float = 0.2,
) -> tuple[SynthSpec, NestedTruth]:
    """Two-scale structure: chapters with mutually distant centroids, scenes
    within a chapter sharing the chapter direction plus a small jitter. The
    flat spec plants every scene with an explicit centroid; the returned
    truth carries both boundary scales.
    """
    if not chapters or any(len(ch) == 0 for ch in chapters):
        raise ConfigError("chapters must be non-empty lists of scene lengths")
    rng = np.random.default_rng(seed)
    chapter_dirs: list[np.ndarray] = []
    for _ in chapters:
        for attempt in range(_REJECTION_LIMIT + 1):
            if attempt == _REJECTION_LIMIT:
                raise ConfigError("could not separate chapter centroids")
            cand = _unit_sphere(rng, dim)
            if all(abs(float(cand @ c)) <= max_centroid_cos for c in chapter_dirs):
                chapter_dirs.append(cand)
                break
    segments: list[SegmentSpec] = []
    scene_bounds: list[int] = []
    chapter_bounds: list[int] = []
    t = 0
    for ch_idx, scene_lengths in enumerate(chapters):
        if ch_idx > 0:
            chapter_bounds.append(t)
        for sc_idx, length in enumerate(scene_lengths):
            if t > 0:
                scene_bounds.append(t)
            jitter = scene_jitter * _unit_sphere(rng, dim)
            centroid = chapter_dirs[ch_idx] + jitter
            centroid = centroid / np.linalg.norm(centroid)
            segments.append(
                SegmentSpec(
                    length=length,
                    centroid=tuple(float(x) for x in centroid),
                    noise_sigma=noise_sigma,
                    drift_rate=drift_rate,
                )
            )
            t += length
    spec = SynthSpec(dim=dim, segments=tuple(segments), seed=seed, max_centroid_cos=max_centroid_cos)
    return spec, NestedTruth(
        scene_boundaries=tuple(scene_bounds), chapter_boundaries=tuple(chapter_bounds)
    )
