"""Exception types raised across the package.

Every error subclasses ``ValueError`` so callers that only care about bad
input can catch one thing.
"""


class AquaError(ValueError):
    """Base class for all package errors."""


class RejectedInputError(AquaError):
    """A sample value was non-finite or otherwise unusable."""


class OrderingError(AquaError):
    """Timestamps are not strictly increasing."""


class DimensionError(AquaError):
    pass


class DomainError(AquaError):
    """An argument lies outside the domain of a formula."""


class FitError(AquaError):
    pass


class PredictionError(AquaError):
    pass


class UndefinedVarianceError(AquaError):
    pass


class IndexCorruptionError(AquaError):
    """A quantized index disagrees with the series it claims to cover."""


class ConfigError(AquaError):
    pass


class ParseError(AquaError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptySeriesError(AquaError):
    pass


class EvaluationError(AquaError):
    pass


class NoLinkError(AquaError):
    pass
