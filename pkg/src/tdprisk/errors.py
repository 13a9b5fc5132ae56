"""Exception hierarchy for the toolkit.

Every error raised on purpose derives from :class:`TdpRiskError` so the CLI
can map any domain failure to a single exit code.
"""


class TdpRiskError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(TdpRiskError):
    """Shapes or lengths of inputs do not agree."""


class NumericError(TdpRiskError):
    """A value is NaN/infinite where a finite number is required."""


class DataError(TdpRiskError):
    """Dataset content is invalid (ingestion, schema, or value problems).

    ``diagnostics`` holds one message per individual failure so callers can
    report every bad cell, not just the first.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics) if diagnostics is not None else [message]


class TrainingError(TdpRiskError):
    """Model fitting cannot proceed (for example a class has no observations)."""


class EvaluationError(TdpRiskError):
    """A resampling protocol received arguments it cannot honour."""
