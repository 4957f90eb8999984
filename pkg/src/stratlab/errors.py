"""Exception types raised across the package."""


class StratlabError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(StratlabError, ValueError):
    """A parameter or time argument lies outside its admissible range."""


class UnsupportedFamilyError(StratlabError, ValueError):
    """The operation is not defined for this process family."""


class UnsupportedRegimeError(StratlabError, ValueError):
    """The kernel is outside both the critical and the supercritical regime."""


class NotPositiveSemidefiniteError(StratlabError, ArithmeticError):
    """The covariance matrix could not be factorized even with maximal jitter."""


class InvalidVarianceError(StratlabError, ValueError):
    """A variance function decreased somewhere on the grid."""


class WrongExperimentError(StratlabError, ValueError):
    """The kernel regime does not match the requested experiment."""
