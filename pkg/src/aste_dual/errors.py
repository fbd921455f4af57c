"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError and
subclasses -> 2, anything else -> 3.
"""


class AsteError(Exception):
    """Base class for all package errors."""


class ConfigError(AsteError):
    """Invalid configuration or usage."""


class DataError(AsteError):
    """Malformed or inconsistent input data."""


class CorpusParseError(DataError):
    """A corpus file line could not be parsed."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class AlignmentError(DataError):
    """Word/subword or corpus/sidecar alignment failure."""


class GraphError(DataError):
    """Invalid dependency structure."""


class AnnotatorError(AsteError):
    """An annotation backend failed or is unavailable."""


class CheckpointError(DataError):
    """A checkpoint file is unreadable or inconsistent with its config."""


class TrainingDiverged(AsteError):
    """Non-finite loss encountered during training."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
