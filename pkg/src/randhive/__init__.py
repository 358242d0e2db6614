"""Random hives from GUE minor processes, lozenge tilings and their limits."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CapacityError,
    ConfigError,
    DomainError,
    ExtrapolationError,
    GeometryError,
    InfeasibleError,
    NumericalError,
    ParameterError,
    PreconditionError,
    RandHiveError,
    RangeError,
    StatisticsError,
    ValidationError,
)
