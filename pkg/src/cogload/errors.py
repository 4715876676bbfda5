"""Exception taxonomy shared across the pipeline."""


class CogloadError(Exception):
    """Base class for all library errors."""


class DimensionError(CogloadError, ValueError):
    """Array shape violates an operation contract; message names the axis."""


class NumericError(CogloadError, ValueError):
    """Non-finite values where finite ones are required."""


class ValidationError(CogloadError, ValueError):
    """Input fails a documented precondition."""


class ParseError(CogloadError, ValueError):
    """Malformed input file; message carries file and line number."""


class RangeError(CogloadError, ValueError):
    """Timestamps or intervals fall outside the covered range."""


class DivergenceError(CogloadError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class StratificationError(ValidationError):
    """A class is missing from one side of a stratified split."""


class ConfigError(CogloadError, ValueError):
    """Invalid or inconsistent run configuration."""
