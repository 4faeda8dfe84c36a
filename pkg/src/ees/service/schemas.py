"""Pydantic request/response models for the segmentation service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class SessionConfig(BaseModel):
    dim: int = Field(ge=1)
    levels: int = Field(default=3, ge=1)
    thresholds: float | list[float] = 0.4
    window_cap: int = Field(default=32, ge=1)
    predictor: str = "mean_pool_identity"
    online_learning: bool = False
    seed: int = 0
    hidden: int = Field(default=16, ge=1)
    learning_rate: float = Field(default=1e-2, gt=0)


class SessionCreated(BaseModel):
    session_id: str
    config: SessionConfig


class FramesRequest(BaseModel):
    frames: list[list[float]]


class SegmentRecord(BaseModel):
    level: int
    start_frame: int
    end_frame: int
    essential_frame: int
    error_peak: float
    provisional: bool
    embedding: list[float] | None = None


class IngestResponse(BaseModel):
    session_id: str
    frames_ingested: int
    clock: int
    segments: list[SegmentRecord]


class HierarchyStats(BaseModel):
    frames: int
    segment_counts: dict[int, int]
    token_counts: dict[int, int]
    mean_segment_frames: dict[int, float | None]
    compression_ratio: float | None


class FlushResponse(BaseModel):
    session_id: str
    clock: int
    segments: list[SegmentRecord]
    stats: HierarchyStats


class EventSummaryRecord(BaseModel):
    span: tuple[int, int]
    abstract: list[float]
    coarse: list[float]
    fine: list[float]
    essential_frames: list[int]


class ConsolidateRequest(BaseModel):
    strategy: str = "max_error"
    scale: float | None = None
    seed: int = 0


class ConsolidateResponse(BaseModel):
    session_id: str
    clock: int
    events: list[EventSummaryRecord]


class SessionInfo(BaseModel):
    session_id: str
    clock: int
    config: SessionConfig


class HealthResponse(BaseModel):
    status: str
    sessions: int
    version: str
