"""Exception hierarchy."""


class RKHSIdError(Exception):
    """Base class for all errors raised by rkhsid."""


class BoundaryError(RKHSIdError, ValueError):
    """Requested samples lie before the start of a signal."""

    def __init__(self, message, first_valid=None):
        super().__init__(message)
        self.first_valid = first_valid


class KindMismatchError(RKHSIdError, ValueError):
    """Input locations do not match the kind or dimension a kernel expects."""


class RankError(RKHSIdError, ValueError):
    """A matrix that must be full rank is singular."""

    def __init__(self, message, rank=None, dim=None):
        super().__init__(message)
        self.rank = rank
        self.dim = dim


class StructuralError(RKHSIdError, ValueError):
    """A matrix violates a structural requirement (e.g. symmetry)."""


class ConditioningError(RKHSIdError, ArithmeticError):
    """A factorization failed or a solve lost too much accuracy."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class UndefinedFitError(RKHSIdError, ValueError):
    """The percentage fit is undefined for a constant reference signal."""


class UnsupportedExtractionError(RKHSIdError, TypeError):
    """Impulse responses can only be extracted from linear kernels."""


class TuningFailedError(RKHSIdError, ArithmeticError):
    """No optimizer start produced a finite objective value."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class ConfigError(RKHSIdError, ValueError):
    """Invalid experiment or command-line configuration."""
