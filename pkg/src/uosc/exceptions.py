"""Exception types raised across the package."""


class UoscError(Exception):
    """Base class for all package errors."""


class ParameterError(UoscError, ValueError):
    """Invalid dimensions or configuration values."""


class GenerationError(UoscError, RuntimeError):
    """Random basis generation hit a rank-deficient draw."""


class ComputationError(UoscError, ArithmeticError):
    """A numerical quantity is undefined for the given input."""


class ConvergenceError(UoscError, RuntimeError):
    """An iterative solver stopped before meeting its tolerances.

    Attributes
    ----------
    primal_residual, dual_residual : float
        Largest residuals over the unconverged columns at exit.
    iterations : int
        Iterations performed.
    """

    def __init__(self, message, primal_residual=float("nan"),
                 dual_residual=float("nan"), iterations=0):
        super().__init__(message)
        self.primal_residual = primal_residual
        self.dual_residual = dual_residual
        self.iterations = iterations
