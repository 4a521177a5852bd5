"""Exception hierarchy.

Each exception carries the CLI exit code it maps to, so the command-line
front end never has to know which module raised.
"""


class AbcdError(Exception):
    """Base class for all package errors."""

    exit_code = 4


class InputError(AbcdError, ValueError):
    """Malformed or out-of-contract input (bad file, bad flag value, bad shape)."""

    exit_code = 2


class DimensionError(InputError):
    """Image or vector dimensions violate a precondition."""


class EmptyBackgroundError(InputError):
    """Background mask is too small to estimate a reference color."""


class NoLesionFound(AbcdError):
    """Segmentation produced no usable lesion (no contrast or degenerate coverage)."""

    exit_code = 3


class TinyLesionError(AbcdError):
    """Lesion is too small for hull / clustering based features."""

    exit_code = 3


class DivergenceError(AbcdError, ArithmeticError):
    """A numeric iteration produced non-finite values."""


class DegenerateDataError(AbcdError, ArithmeticError):
    """Data has no variance (or rank) where some is required."""
