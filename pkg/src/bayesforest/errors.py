"""Exception hierarchy shared across the package.

Each top-level class maps to one CLI exit code, so callers can distinguish
bad configuration from bad input data from failed inference.
"""


class BayesForestError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BayesForestError):
    """Invalid options, flags, or argument combinations."""


class ParseError(BayesForestError):
    """Input file could not be parsed (ragged rows, bad delimiter, ...)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(BayesForestError):
    """Parsed data violates a requirement of the model."""


class EmptyDatasetError(DataError):
    """Every row was removed (e.g. all rows contained missing values)."""


class InferenceError(BayesForestError):
    """Prediction or summarization was asked of an unusable trace."""


class GraphCycleError(BayesForestError):
    """A mutation would have created a cycle in the feature forest.

    Callers that filter candidate parents correctly can never trigger this;
    it exists to fail loudly on internal bookkeeping bugs.
    """
