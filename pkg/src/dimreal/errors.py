"""Exception types shared across the pipeline."""


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or inconsistent."""


class InputError(ValueError):
    """Runtime inputs violate a documented precondition (e.g. dimension mismatch)."""


class NoDepthError(RuntimeError):
    """A depth query found zero valid (> 0) pixels in the requested region."""


class DegenerateMaskError(RuntimeError):
    """Mask-area adjustment eroded the mask to empty before reaching bounds."""


class ProtocolError(ValueError):
    """A wire message failed validation.

    ``field`` names the offending field ("magic", "version", "length", ...)
    so callers and tests can pinpoint what was rejected.
    """

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class EngineNumericError(RuntimeError):
    """The inpainting engine produced non-finite values or failed numerically."""
