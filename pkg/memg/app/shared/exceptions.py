class ApplicationError(Exception):
    """Base exception for shared application errors.

    Subclasses carry the process exit code used by the command-line driver
    and the error type reported by the HTTP API.
    """

    exit_code: int = 1
    error_type: str = "application_error"


class UsageError(ApplicationError):
    """Raised when a caller passes arguments outside the supported range."""

    exit_code = 2
    error_type = "usage_error"


class FormatError(ApplicationError):
    """Raised when persisted frames, parameters or features are malformed."""

    exit_code = 3
    error_type = "format_error"


class NumericalError(ApplicationError):
    """Raised when a numerical routine cannot produce a result."""

    exit_code = 4
    error_type = "numerical_error"


class InvalidInputError(NumericalError):
    """Raised for NaN or infinite inputs."""


class DegenerateSpreadError(NumericalError):
    """Raised when a component spread is numerically zero."""


class EmptyModelError(NumericalError):
    """Raised when a model without components is evaluated."""


class NoFreeParametersError(UsageError):
    """Raised when a stage mask leaves no parameter free."""


class ShapeError(NumericalError):
    """Raised when vector lengths or row dimensions disagree."""


class SingularSystemError(NumericalError):
    """Raised when the damped normal equations cannot be solved."""


class InvalidStartError(NumericalError):
    """Raised when the loss at the starting point is not finite."""


class NoDominantFrequencyError(NumericalError):
    """Raised when a frame carries no spectral energy."""


class InvalidBandError(UsageError):
    """Raised when a band-pass center or width is out of range."""


class InsufficientPeaksError(NumericalError):
    """Raised when gain fitting finds fewer than two usable peaks."""


class NoComponentsError(NumericalError):
    """Raised when no envelope gradient exceeds the detection threshold."""


class UndefinedConfidenceError(NumericalError):
    """Raised when a confidence is requested for a frame without positive maximum."""


class WindowError(NumericalError):
    """Raised when a component window does not overlap the frame."""


class DegenerateFeatureError(NumericalError):
    """Raised when a feature column has zero spread."""


class SplitError(UsageError):
    """Raised when a train/test split leaves a partition empty."""


class DegenerateTrainingError(NumericalError):
    """Raised when training data carries a single class."""


class AliasingError(UsageError):
    """Raised when a component frequency reaches the Nyquist limit."""


class SchemaVersionError(FormatError):
    """Raised when a persisted document has an unexpected schema version."""
