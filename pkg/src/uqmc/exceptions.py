"""Exception types shared across the library."""


class UqmcError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(UqmcError):
    """Distribution or configuration parameters are invalid."""


class SupportError(UqmcError):
    """Data lies outside the support of the requested family."""


class DegenerateDataError(UqmcError):
    """Data admits no proper fit (e.g. all values identical)."""


class FitConvergenceError(UqmcError):
    """Iterative fit failed to converge within its iteration budget."""


class EvaluationError(UqmcError):
    """A model evaluation produced a non-finite output."""

    def __init__(self, message: str, index: int | None = None, x=None):
        super().__init__(message)
        self.index = index
        self.x = x


class BudgetError(UqmcError):
    """Computational budget cannot cover the requested estimator."""


class EstimatorError(UqmcError):
    """Estimator-level failure (degenerate statistics, support violation)."""


class QuadratureError(UqmcError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class ConfigError(UqmcError):
    """Invalid run configuration."""
