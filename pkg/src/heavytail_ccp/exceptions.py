"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A distribution or model parameter is outside its admissible range."""


class DomainError(ValueError):
    """A function was evaluated outside the region where it is defined."""


class OracleFailureError(RuntimeError):
    """Numerical quadrature or root finding did not reach its tolerance."""


class SingularDensityError(ArithmeticError):
    """The density is numerically zero where it has to be inverted."""


class ConvexityError(ValueError):
    """A quantile table is not convex where a convex approximation is required."""

    def __init__(self, message, percentile=None):
        super().__init__(message)
        self.percentile = percentile


class DegenerateScaleError(ValueError):
    """A reformulated constraint has a non-positive noise scale."""


class AssemblyError(ValueError):
    """A QP subproblem could not be assembled from the constraint data."""


class ScenarioError(ValueError):
    """A scenario document violates the schema or a modelling assumption."""

    def __init__(self, message, field=None):
        if field and not message.startswith(field):
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class SolverError(RuntimeError):
    """The QP backend failed in a way the outer loop cannot recover from."""
