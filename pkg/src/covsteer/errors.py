"""Exception types shared across the package."""


class CovsteerError(Exception):
    """Base class for all package errors."""


class ConfigError(CovsteerError, ValueError):
    """Invalid parameters or configuration."""


class CorpusParseError(CovsteerError, ValueError):
    """A corpus file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(CovsteerError, ValueError):
    """A transaction violates the DUV parameter ranges."""


class CoverageError(CovsteerError, KeyError):
    """Internal-consistency error: a coverage key outside the universe."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class EncodingError(CovsteerError, ValueError):
    """A transaction cannot be encoded with the fitted schema."""


class ShapeError(CovsteerError, ValueError):
    """Operand shapes are incompatible."""


class TrainingError(CovsteerError, RuntimeError):
    """Training diverged (non-finite gradients)."""


class NotFittedError(CovsteerError, RuntimeError):
    """A selector was used before ``fit`` was called."""
