class AdapterError(Exception):
    """Base class for adapter failures."""


class MediaError(AdapterError):
    """Media could not be decoded, or yielded no frames."""


class EncoderLoadError(AdapterError):
    """The requested encoder is unknown or could not be loaded locally."""
