"""Exception hierarchy shared by all modules."""


class ReuploadError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(ReuploadError, ValueError):
    """An argument is malformed, non-finite or has the wrong length."""


class DegenerateFitError(ReuploadError):
    """A fit cannot be performed, e.g. only one class is present.

    ``model`` optionally carries a fallback fit (for instance the tied
    threshold when both class means coincide).
    """

    def __init__(self, message, model=None):
        super().__init__(message)
        self.model = model


class DegenerateLossError(ReuploadError):
    """The loss is undefined for the given batch (single class)."""


class PrecisionError(ReuploadError):
    """A construction would exceed double precision."""


class RankDeficiencyError(ReuploadError):
    """More components were requested than the data rank supports."""


class FormatError(ReuploadError):
    """A file could not be parsed; the message names row and column."""


class LabelError(ReuploadError):
    """Labels outside the accepted set."""


class UndefinedClassifierError(ReuploadError):
    """Coefficients a = b = c = 0 describe no classifier."""


class NumericalFailureError(ReuploadError):
    """A numerical routine produced a non-finite value."""


class UnsupportedDimensionError(ReuploadError):
    """The operation only supports a different feature dimension."""
