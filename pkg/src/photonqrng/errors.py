"""Exception types shared across the package."""


class QrngError(ValueError):
    """Base class for domain and configuration errors (CLI exit code 1)."""


class DomainError(QrngError):
    """An argument lies outside the domain of the operation."""


class InfeasibleError(QrngError):
    """A requested operating point cannot be reached, e.g. it needs T > 1."""


class DegenerateError(QrngError):
    """A statistic is undefined for the input, e.g. a constant bit stream."""


class InsufficientDataError(QrngError):
    """Not enough data to compute a statistic."""


class EmptyStreamError(InsufficientDataError):
    """The operation needs at least one bit."""
