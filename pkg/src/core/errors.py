class ShadowError(Exception):
    """
    Base class for everything the shadow library raises on purpose.
    """


class DomainError(ShadowError, ValueError):
    pass


class DimensionError(ShadowError, ValueError):
    pass


class ConvergenceError(ShadowError, ArithmeticError):
    pass


class MatrixParseError(ShadowError, ValueError):
    pass


class AnalyticFormUnavailable(ShadowError):
    """
    No closed-form density exists for this spectrum/weight pattern.
    Callers fall back to Monte Carlo and flag the result.
    """


class PointMassError(ShadowError):
    """
    The law collapsed to a single atom, so there is no density to evaluate.
    """

    def __init__(self, location: float, message: str | None = None):
        self.location = float(location)
        super().__init__(message or f"Distribution is a point mass at {self.location:g}")
