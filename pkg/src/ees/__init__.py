"""Streaming event segmentation and consolidation for embedding streams."""

from .consolidation import (
    AttentionConfig,
    ConsolidationResult,
    consolidate_all,
    consolidate_event,
    cross_attention,
    cross_layer_aggregate,
    intra_layer_aggregate,
    select_essential,
)
from .embs import normalize_frame, read_stream, read_stream_array, write_stream
from .engine import EngineConfig, EventEngine, detect_boundary, hierarchy_stats
from .errors import (
    ConfigError,
    DegenerateVectorError,
    EesError,
    MissingEmbeddingsError,
    SequenceError,
    StreamFormatError,
)
from .predictors import (
    PredictorConfig,
    PredictorState,
    abstract,
    load_checkpoint,
    online_update,
    predict_next,
    prediction_error,
    save_checkpoint,
    train_predictor,
)
from .types import (
    EventHierarchy,
    EventSegment,
    EventSummary,
    FrameEmbedding,
    LatentToken,
    StreamHeader,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionConfig",
    "ConfigError",
    "ConsolidationResult",
    "DegenerateVectorError",
    "EesError",
    "EngineConfig",
    "EventEngine",
    "EventHierarchy",
    "EventSegment",
    "EventSummary",
    "FrameEmbedding",
    "LatentToken",
    "MissingEmbeddingsError",
    "PredictorConfig",
    "PredictorState",
    "SequenceError",
    "StreamFormatError",
    "StreamHeader",
    "abstract",
    "consolidate_all",
    "consolidate_event",
    "cross_attention",
    "cross_layer_aggregate",
    "detect_boundary",
    "hierarchy_stats",
    "intra_layer_aggregate",
    "load_checkpoint",
    "normalize_frame",
    "online_update",
    "predict_next",
    "prediction_error",
    "read_stream",
    "read_stream_array",
    "save_checkpoint",
    "select_essential",
    "train_predictor",
    "write_stream",
]
