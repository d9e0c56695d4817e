"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: parameter problems are usage errors,
shape/data/format problems are data errors, and non-finite arithmetic is a
numeric failure.
"""


class RidgeheadError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(RidgeheadError, ValueError):
    """A hyperparameter or option is out of its valid range."""


class ShapeError(RidgeheadError, ValueError):
    """Matrix dimensions do not conform for the requested operation."""


class DataError(RidgeheadError, ValueError):
    """Input data violates a contract (non-finite values, bad labels, ...)."""


class FormatError(DataError):
    """A file does not conform to its binary or text format."""


class NumericError(RidgeheadError, RuntimeError):
    """A computation produced non-finite values where finite ones are required."""
