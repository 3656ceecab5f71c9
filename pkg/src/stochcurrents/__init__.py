"""Chaos expansions and regularity thresholds for stochastic currents."""

__version__ = "0.1.0"

from .errors import (CapacityError, ConditioningError, ConfigError, CurrentsError, DomainError,  # noqa: E402
                     GridError, ScanError, UnsupportedDriverError)
from .gaussian_model import CovarianceSpec, Kind, PathEnsemble, sample_paths  # noqa: E402
from .quadrature import QuadratureScheme, SingularityPolicy  # noqa: E402

__all__ = [
    "__version__", "CovarianceSpec", "Kind", "PathEnsemble", "QuadratureScheme", "SingularityPolicy",
    "sample_paths", "CurrentsError", "DomainError", "CapacityError", "ConditioningError", "GridError",
    "UnsupportedDriverError", "ConfigError", "ScanError",
]
