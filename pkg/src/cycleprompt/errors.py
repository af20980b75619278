"""Exception types shared across the package.

The CLI maps these onto exit codes: ``ValidationError`` -> 1, ``DataIOError`` -> 2.
"""


class ValidationError(ValueError):
    """Bad input values, shapes or configuration."""


class ShapeError(ValidationError):
    pass


class DataIOError(OSError):
    """A referenced file is missing, unreadable or unwritable."""
