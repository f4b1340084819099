"""Exception types shared across the package."""


class GPValidError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(GPValidError):
    """A kernel/mean spec violates its positivity or shape constraints."""


class DimensionMismatchError(GPValidError):
    """Input points of incompatible dimension were mixed."""


class IllConditionedModelError(GPValidError):
    """Cholesky factorization failed after exhausting the jitter ladder."""

    def __init__(self, message, final_jitter=None):
        super().__init__(message)
        self.final_jitter = final_jitter


class TrainingFailureError(GPValidError):
    """Every hyperparameter-optimization restart failed."""


class BoundaryInputError(GPValidError):
    """A probability hit the open-interval boundary {0, 1}."""


class WidenGridError(GPValidError):
    """The posterior grid cannot be widened enough to contain the MLE."""


class UnsupportedPlotError(GPValidError):
    """Plotting was requested for inputs the plot does not support."""
