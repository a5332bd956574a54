"""Exception and warning types raised across the package."""


class SMMError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SMMError, ValueError):
    pass


class NotPSD(SMMError, ValueError):
    """A matrix that must be positive semi-definite is not.

    The most negative eigenvalue is kept on ``min_eigenvalue``.
    """

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class NoClosedForm(SMMError):
    """No analytic expected kernel exists for this kernel/distribution pair."""


class SingularSolve(SMMError, ArithmeticError):
    pass


class NegativeSquaredDistance(SMMError, ValueError):
    pass


class DegenerateLabels(SMMError, ValueError):
    pass


class GramNotPSD(SMMError):
    pass


class UnsupportedKernel(SMMError, TypeError):
    pass


class ConvergenceWarning(UserWarning):
    """The SMO solver hit its iteration budget before meeting the KKT tolerance."""
