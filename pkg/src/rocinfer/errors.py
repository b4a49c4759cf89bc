"""Exception hierarchy for rocinfer."""


class RocInferError(ValueError):
    """Base class for all library errors."""


class ParseError(RocInferError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class SchemaError(RocInferError):
    pass


class DegenerateSplitError(RocInferError):
    pass


class UndefinedRateError(RocInferError):
    """Raised when a rate or AUC needs both label classes and one is missing."""


class DimensionError(RocInferError):
    pass


class SeparationError(RocInferError):
    """Log-likelihood is unbounded because the features separate the labels."""


class RankError(RocInferError):
    pass


class NonIdentifiedError(RocInferError):
    pass


class DegenerateDensityError(RocInferError):
    pass


class RangeError(RocInferError):
    pass


class InversionError(RocInferError):
    pass


class ReplicateFailureError(RocInferError):
    pass


class DegenerateComparisonError(RocInferError):
    """The difference of influence values has (numerically) zero variance."""


class UnknownScenarioError(RocInferError):
    pass
