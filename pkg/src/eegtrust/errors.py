"""Exception types shared across the package.

The CLI maps these onto exit codes: ``ConfigError`` -> 1, ``DataError`` -> 2,
``NumericalError`` -> 3.
"""


class EEGTrustError(Exception):
    """Base class for all package errors."""


class ConfigError(EEGTrustError, ValueError):
    """Invalid configuration or usage."""


class DataError(EEGTrustError, ValueError):
    """Malformed, missing or inconsistent data on disk or in memory."""


class ManifestError(DataError):
    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{message} (field: {field})"
        super().__init__(message)


class ShapeMismatchError(DataError):
    pass


class NonFiniteError(DataError):
    pass


class NumericalError(EEGTrustError, ArithmeticError):
    """Non-finite loss, activation or gradient during training."""


class NotFittedError(EEGTrustError, RuntimeError):
    pass
