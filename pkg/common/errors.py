"""
error types shared by every package; each carries the CLI exit code it maps to.
"""


class GCTTTError(Exception):
    exit_code = 1


class ConfigurationError(GCTTTError, ValueError):
    """Invalid configuration, schema violation or unmet precondition."""

    exit_code = 2


class ShapeError(GCTTTError, ValueError):
    exit_code = 1


class MissingArtifactError(ConfigurationError, FileNotFoundError):
    """A file a command depends on (dataset, checkpoint, layout) does not exist."""

    exit_code = 3


class NumericError(GCTTTError, ArithmeticError):
    exit_code = 4

    def __init__(self, message: str, term: str = ""):
        super().__init__(f"{message} (term: {term})" if term else message)
        self.term = term


class IntegrityError(GCTTTError):
    """Checksum mismatch, truncated blob or bad magic bytes."""

    exit_code = 5


class FormatVersionError(IntegrityError):
    exit_code = 5
