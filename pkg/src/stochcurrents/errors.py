"""Exception hierarchy shared by every module of the package."""


class CurrentsError(Exception):
    """Base class for all library errors."""


class DomainError(CurrentsError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class CapacityError(CurrentsError, ValueError):
    """A request exceeds a configured table or precomputation ceiling."""


class ConditioningError(CurrentsError, ArithmeticError):
    """A covariance matrix could not be factorized, even after jitter."""

    def __init__(self, message, minor=None):
        super().__init__(message)
        self.minor = minor


class GridError(CurrentsError, LookupError):
    """A time point is not part of a sampled grid."""


class UnsupportedDriverError(CurrentsError, ValueError):
    """The operation is not defined for the requested driving process."""


class ConfigError(CurrentsError, ValueError):
    """An experiment configuration violates its schema."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class ScanError(CurrentsError, RuntimeError):
    """A threshold scan grid does not bracket a transition."""
