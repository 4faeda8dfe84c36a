"""FastAPI service exposing per-session streaming segmentation.

Each session owns one engine instance; frames are appended with POST
requests and finalized segments come back in the response, so a client can
stream indefinitely while holding no state of its own. Flush and
consolidate operate on a snapshot and never disturb the live session.

Run with::

    uvicorn ees.service.app:app
"""

from __future__ import annotations

import itertools
import threading

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..consolidation import AttentionConfig, consolidate_all
from ..engine import EngineConfig, EventEngine
from ..errors import EesError
from ..hierarchy_io import segment_record
from ..predictors import PredictorConfig
from ..types import EventSegment
from .schemas import (
    ConsolidateRequest,
    ConsolidateResponse,
    EventSummaryRecord,
    FlushResponse,
    FramesRequest,
    HealthResponse,
    HierarchyStats,
    IngestResponse,
    SegmentRecord,
    SessionConfig,
    SessionCreated,
    SessionInfo,
)


class _Session:
    def __init__(self, session_id: str, config: SessionConfig) -> None:
        self.id = session_id
        self.config = config
        self.lock = threading.Lock()
        predictor = PredictorConfig(
            kind=config.predictor,
            dim=config.dim,
            levels=config.levels,
            window_cap=config.window_cap,
            hidden=config.hidden,
            learning_rate=config.learning_rate,
            seed=config.seed,
        )
        self.engine = EventEngine(
            EngineConfig(
                dim=config.dim,
                levels=config.levels,
                thresholds=config.thresholds,
                window_cap=config.window_cap,
                predictor=predictor,
                online_learning=config.online_learning,
            )
        )


def _to_record(segment: EventSegment, include_embedding: bool) -> SegmentRecord:
    return SegmentRecord(**segment_record(segment, include_embedding=include_embedding))


def create_app() -> FastAPI:
    app = FastAPI(title="ees", version=__version__)
    sessions: dict[str, _Session] = {}
    counter = itertools.count()
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> _Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no such session {session_id!r}")
        return session

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return HealthResponse(status="ok", sessions=len(sessions), version=__version__)

    @app.post("/sessions", response_model=SessionCreated)
    def create_session(config: SessionConfig) -> SessionCreated:
        try:
            with registry_lock:
                session_id = f"s{next(counter):06d}"
                session = _Session(session_id, config)
                sessions[session_id] = session
        except EesError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return SessionCreated(session_id=session_id, config=config)

    @app.get("/sessions/{session_id}", response_model=SessionInfo)
    def session_info(session_id: str) -> SessionInfo:
        session = get_session(session_id)
        return SessionInfo(session_id=session.id, clock=session.engine.clock, config=session.config)

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str) -> dict:
        get_session(session_id)
        del sessions[session_id]
        return {"deleted": session_id}

    @app.post("/sessions/{session_id}/frames", response_model=IngestResponse)
    def ingest_frames(session_id: str, request: FramesRequest, embeddings: bool = False) -> IngestResponse:
        session = get_session(session_id)
        emitted: list[SegmentRecord] = []
        with session.lock:
            try:
                for row in request.frames:
                    for seg in session.engine.ingest_vector(np.asarray(row, dtype=np.float64)):
                        emitted.append(_to_record(seg, embeddings))
            except EesError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            clock = session.engine.clock
        return IngestResponse(
            session_id=session.id,
            frames_ingested=len(request.frames),
            clock=clock,
            segments=emitted,
        )

    @app.post("/sessions/{session_id}/flush", response_model=FlushResponse)
    def flush(session_id: str, embeddings: bool = False) -> FlushResponse:
        session = get_session(session_id)
        with session.lock:
            hierarchy = session.engine.flush()
            stats = session.engine.running_stats(hierarchy)
            clock = session.engine.clock
        records = [
            _to_record(seg, embeddings)
            for lvl in range(1, hierarchy.depth + 1)
            for seg in hierarchy.segments(lvl)
        ]
        return FlushResponse(
            session_id=session.id,
            clock=clock,
            segments=records,
            stats=HierarchyStats(**stats),
        )

    @app.post("/sessions/{session_id}/consolidate", response_model=ConsolidateResponse)
    def consolidate(session_id: str, request: ConsolidateRequest) -> ConsolidateResponse:
        session = get_session(session_id)
        with session.lock:
            hierarchy = session.engine.flush()
            clock = session.engine.clock
        try:
            result = consolidate_all(
                hierarchy,
                AttentionConfig(scale=request.scale),
                strategy=request.strategy,
                seed=request.seed,
            )
        except EesError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        events = [
            EventSummaryRecord(
                span=summary.event_span,
                abstract=[float(x) for x in summary.abstract],
                coarse=[float(x) for x in summary.coarse],
                fine=[float(x) for x in summary.fine],
                essential_frames=prov["essential_frames"],
            )
            for summary, prov in zip(result.summaries, result.provenance)
        ]
        return ConsolidateResponse(session_id=session.id, clock=clock, events=events)

    return app


app = create_app()
