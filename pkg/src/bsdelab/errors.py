"""Exception and warning types raised across the package."""


class BSDELabError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(BSDELabError, ValueError):
    """A configuration value violates a documented invariant."""


class CorruptedDataError(BSDELabError, ValueError):
    """Input arrays hold values that cannot come from a valid simulation."""


class RegressionSingularError(BSDELabError, ArithmeticError):
    """The regression design is rank deficient and no ridge term was given."""


class DivergedError(BSDELabError, ArithmeticError):
    """A backward sweep produced non-finite values.

    Attributes
    ----------
    index : int
        Grid index at which the first non-finite value appeared.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NumericOverflowError(BSDELabError, ArithmeticError):
    """A generator evaluation returned a non-finite value."""


class UnsupportedRegimeError(BSDELabError):
    """The requested operation needs hypotheses the inputs do not satisfy."""


class NonContractionWarning(UserWarning):
    """Picard iteration stopped at ``max_iters`` without meeting ``tol``."""
