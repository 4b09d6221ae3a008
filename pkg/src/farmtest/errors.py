"""Exception types raised by farmtest.

All subclass ValueError (or RuntimeError for solver failures) so callers
that only know the standard hierarchy still catch them.
"""


class FarmtestError(Exception):
    """Base class for all farmtest errors."""


class StructuralError(FarmtestError, ValueError):
    """Malformed input: dimension mismatch, non-symmetric matrix, bad shape."""


class DomainError(FarmtestError, ValueError):
    """Parameter outside its valid range (k > n, alpha not in (0,1), ...)."""


class DegenerateDataError(FarmtestError, ValueError):
    """Input that is formally valid but statistically degenerate.

    Examples: an all-zero covariate matrix, residuals identically zero,
    a variance estimate collapsing to zero for some coordinate.
    """


class NumericalError(FarmtestError, RuntimeError):
    """A numerical routine failed to converge."""


class FormatError(FarmtestError, ValueError):
    """A file could not be parsed (CSV layout, dates, numbers)."""


class DataError(FarmtestError, ValueError):
    """Data values incompatible with a requested operation,

    e.g. a non-positive observation under a log transformation.
    """


class ConfigError(FarmtestError, ValueError):
    """Invalid simulation or CLI configuration."""
