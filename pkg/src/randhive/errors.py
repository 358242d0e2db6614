"""Exception hierarchy shared by every module.

The CLI maps :class:`ConfigError` to exit code 2 and every other
:class:`RandHiveError` to exit code 3.
"""


class RandHiveError(Exception):
    """Base class for all package errors."""


class ConfigError(RandHiveError):
    pass


class ParameterError(RandHiveError, ValueError):
    pass


class RangeError(RandHiveError, IndexError):
    pass


class DomainError(RandHiveError, ValueError):
    pass


class GeometryError(RandHiveError, ValueError):
    pass


class ValidationError(RandHiveError, ValueError):
    pass


class PreconditionError(RandHiveError, ValueError):
    pass


class NumericalError(RandHiveError, ArithmeticError):
    """Raised when an iterative method fails; ``diagnostics`` holds details."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class CapacityError(RandHiveError):
    pass


class InfeasibleError(RandHiveError):
    pass


class StatisticsError(RandHiveError, ValueError):
    pass


class ExtrapolationError(RandHiveError, ValueError):
    pass
