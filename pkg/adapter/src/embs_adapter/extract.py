"""Media -> EMBS extraction: sample, encode, pool, normalize, write."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .embs_writer import write_embs
from .encoders import load_encoder
from .errors import AdapterError, MediaError
from .media import sample_frames

POOLINGS = ("patch_mean", "cls")


@dataclass(frozen=True)
class ExtractionSpec:
    media: str | Path
    fps: float = 0.5
    encoder: str = "local"
    pooling: str = "patch_mean"

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise AdapterError(f"fps must be > 0, got {self.fps}")
        if self.pooling not in POOLINGS:
            raise AdapterError(f"unknown pooling {self.pooling!r}, expected one of {POOLINGS}")


def _pool(tokens: dict[str, np.ndarray], pooling: str) -> np.ndarray:
    if pooling == "patch_mean":
        return tokens["patch_tokens"].mean(axis=0)
    return tokens["cls_token"]


def _fps_fraction(fps: float) -> tuple[int, int]:
    frac = Fraction(fps).limit_denominator(1_000_000)
    return frac.numerator, frac.denominator


def extract_embeddings(spec: ExtractionSpec, output: str | Path) -> int:
    """Encode the media into an EMBS file at ``output``; returns the row count.

    Frames are sampled at ``spec.fps`` in temporal order, each pooled to one
    d-vector and L2-normalized, so the file is directly consumable by the
    stream engine. The fps hint is stored in the header.
    """
    encoder = load_encoder(spec.encoder)
    rows: list[np.ndarray] = []
    for image in sample_frames(spec.media, spec.fps):
        vector = _pool(encoder.encode(image), spec.pooling)
        norm = float(np.linalg.norm(vector))
        if norm < 1e-12:
            raise MediaError("frame encoded to a zero vector; cannot normalize")
        rows.append(vector / norm)
    if not rows:
        raise MediaError(f"zero frames sampled from {spec.media}")
    return write_embs(
        output,
        rows,
        dim=encoder.dim,
        frame_count=len(rows),
        fps_hint=_fps_fraction(spec.fps),
    )
