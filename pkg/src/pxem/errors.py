"""Exception types raised by the library."""
import numpy as np


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a function."""


class PreconditionError(ValueError):
    """An operation was called with inputs it does not accept."""


class SingularMatrixError(np.linalg.LinAlgError):
    """A weighted cross-product matrix is singular or too ill-conditioned."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class DegenerateFitError(ArithmeticError):
    """The data admit no interior maximizer (e.g. perfect separation)."""


class DivergenceError(ArithmeticError):
    """An iterate left the region where the model can be evaluated."""


class BoundaryWarning(RuntimeWarning):
    """An update hit the edge of the parameter space and was clamped."""
