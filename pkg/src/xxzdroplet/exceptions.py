"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid model, geometry or estimator parameter."""


class CapacityError(ValueError):
    """Requested object exceeds the desk-scale size limits."""


class ResolventSingularError(ArithmeticError):
    """Spectral parameter too close to the spectrum for a resolvent.

    Attributes
    ----------
    dist : float
        Distance from the real part of the spectral parameter to the spectrum.
    """

    def __init__(self, message, dist):
        super().__init__(message)
        self.dist = dist


class ConvergenceError(RuntimeError):
    """Iterative eigensolver failed; carries the residuals it saw."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class SchemaError(ValueError):
    """File contents do not match the expected record schema."""
