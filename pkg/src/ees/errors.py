"""Exception types shared across the package."""


class EesError(Exception):
    """Base class for all errors raised by this package."""


class StreamFormatError(EesError):
    """Malformed or inconsistent embedding-stream data (bad magic, truncation,
    dimension mismatch, non-finite payload)."""


class DegenerateVectorError(EesError):
    """A vector with (near-)zero norm where a direction is required."""


class SequenceError(EesError):
    """Frames arrived out of order or with the wrong index."""


class ConfigError(EesError):
    """Invalid or inconsistent configuration."""


class MissingEmbeddingsError(EesError):
    """A consolidation input lacks the segment embeddings it needs."""
