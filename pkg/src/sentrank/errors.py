"""Exception types shared across the package."""


class SentrankError(Exception):
    """Base class for all package-specific errors."""


class ParseError(SentrankError):
    """Malformed input data; carries a human-readable location."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{message} ({location})"
        super().__init__(message)


class DataError(SentrankError):
    """Inputs are well-formed but inconsistent (missing docs, cache misses, ...)."""


class ConfigError(SentrankError):
    """Invalid or incomplete pipeline configuration."""


class ScorerError(SentrankError):
    """External scorer failed to start or violated the wire protocol."""
