"""Exception types shared across the package."""


class MfxError(Exception):
    """Base class for all package errors."""


class ParameterError(MfxError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(MfxError, ValueError):
    """Input data lies outside the domain of the operation."""


class FormatError(MfxError, ValueError):
    """An input file or stream does not follow the expected layout."""


class FitError(MfxError, ArithmeticError):
    """A scaling or tail fit cannot be carried out on the usable points."""


class DegenerateScaleError(FitError):
    """Every window covariance at a scale is exactly zero."""
