"""Convert real media into EMBS embedding streams."""

from .errors import AdapterError, EncoderLoadError, MediaError
from .extract import ExtractionSpec, extract_embeddings

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "EncoderLoadError",
    "ExtractionSpec",
    "MediaError",
    "extract_embeddings",
]
