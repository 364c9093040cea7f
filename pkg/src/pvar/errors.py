"""Exception hierarchy shared by all pvar modules."""


class PvarError(Exception):
    """Base class for all errors raised by pvar."""


class StructuralError(PvarError, IndexError):
    """Operator or moment index outside the declared mode/spin space."""


class MomentOrderError(PvarError, OverflowError):
    """Requested moment order exceeds the configured maximum."""


class ClosureError(PvarError):
    """A monomial on a right-hand side cannot be evaluated by the ansatz."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class CapacityError(PvarError):
    """Truncated Hilbert space larger than the configured cap."""


class TruncationError(PvarError):
    """Fock cutoff too small for the requested accuracy."""


class SingularSystemError(PvarError):
    """The bordered steady-state system is singular (degenerate steady states)."""


class SeriesDivergenceError(PvarError):
    """Truncated characteristic-function series left its trusted range."""


class UnphysicalMomentsError(PvarError, ValueError):
    """Moment set that cannot belong to a physical state."""


class ConfigError(PvarError, ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
