"""Exception types shared across the package."""


class CsiSenseError(Exception):
    """Base class for all package errors."""


class ValidationError(CsiSenseError, ValueError):
    """Invalid input, configuration or precondition violation."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class FormatError(CsiSenseError, ValueError):
    """Malformed ``.csit`` / checkpoint container."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} at offset {offset}"
        super().__init__(message)
        self.offset = offset


class NumericalError(CsiSenseError, ArithmeticError):
    """Divergence, non-finite values or a failed numerical sanity check."""
