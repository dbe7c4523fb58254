"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: certification failures -> 1,
usage/configuration problems -> 2, accuracy failures -> 3.
"""


class FtklError(Exception):
    """Base class; ``diagnostics`` carries machine-readable context."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ShapeError(FtklError, ValueError):
    """Operands with incompatible variable counts or truncation degrees."""


class DomainError(FtklError, ValueError):
    """Argument outside the domain of an operation."""


class ConfigurationError(FtklError, ValueError):
    """Invalid parameter combination."""


class UnsupportedWeightError(FtklError, ValueError):
    """Weight not handled by the requested route (non-elliptic, non-radial...)."""


class DegenerateBasisError(FtklError, ValueError):
    """Cholesky pivot below threshold."""


class AccuracyError(FtklError, ArithmeticError):
    """A convergence or discretization check failed."""


class SectorRangeError(AccuracyError):
    """Angular sector scan too short: minimum still decreasing at the boundary."""


class CertificationError(FtklError, AssertionError):
    """A property that must hold exactly (or within err_est) was violated."""
