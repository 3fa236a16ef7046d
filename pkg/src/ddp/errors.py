"""Exception types shared across the package."""


class DdpError(Exception):
    """Base class for all package-specific errors."""


# Raster operations

class OutOfBoundsError(DdpError):
    """A rectangle, line, or point falls outside the image extent."""


class DimensionMismatchError(DdpError):
    """Two rasters/masks that must share dimensions do not."""


class DecodeError(DdpError):
    """Base class for image codec failures."""


class UnsupportedFormatError(DecodeError):
    """The byte stream is not one of the supported image formats."""


class CorruptDataError(DecodeError):
    """The byte stream looks like a supported format but cannot be decoded."""


# Gateway

class GatewayError(DdpError):
    """Base class for model-gateway failures."""


class ConfigError(GatewayError):
    """The gateway is not usable as configured (e.g. no API keys)."""


class AuthFailure(GatewayError):
    """The backend rejected the credentials (401/403); not retryable."""


class ExhaustedRetries(GatewayError):
    """Every retry attempt failed with a transient error."""


class ScriptExhausted(GatewayError):
    """The mock gateway ran out of scripted replies."""


class UnmatchedDigest(GatewayError):
    """Strict digest-keyed mock received a request it has no reply for."""


# Harness

class ManifestError(DdpError):
    """Base class for manifest ingestion failures."""


class ManifestParseError(ManifestError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DuplicateIdError(ManifestError):
    """Two manifest lines share a query id."""


class MissingImageError(ManifestError):
    """A manifest line references an image file that does not exist."""


class EmptyRecordSetError(DdpError):
    """Scoring was asked to summarize zero records."""
