"""Exception hierarchy shared by all modules."""


class MemresError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class DomainError(MemresError, ValueError):
    """An argument lies outside the domain of the requested operation."""

    exit_code = 2


class ConfigError(MemresError, ValueError):
    exit_code = 2


class AccuracyError(MemresError, ArithmeticError):
    """A numerical routine failed to reach its requested tolerance."""

    exit_code = 3


class ContourError(AccuracyError):
    """A quadrature node of the inversion contour hit a singularity."""


class ResolutionError(AccuracyError):
    """The truncated operator cannot resolve the requested behaviour."""


class GridError(MemresError, ValueError):
    exit_code = 2


class SamplingError(MemresError, ValueError):
    exit_code = 2


class RegimeError(DomainError):
    """Critical regime: the subcritical certificate does not apply."""


class PreconditionError(MemresError, RuntimeError):
    exit_code = 2


class OverflowGuardError(AccuracyError):
    pass
