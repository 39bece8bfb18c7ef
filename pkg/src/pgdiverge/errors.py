class PGError(Exception):
    """Base class for errors raised by pgdiverge."""


class ValidationError(PGError, ValueError):
    """Bad input: wrong names, missing keys, violated preconditions."""


class NumericalError(PGError, ArithmeticError):
    """A computation could not produce a trustworthy result."""
