"""Exception hierarchy shared by all modules."""


class GiantAtomError(Exception):
    """Base class for library errors."""


class ConfigurationError(GiantAtomError, ValueError):
    """Inconsistent or invalid input parameters."""

    def __init__(self, message, key_path=None):
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class DomainError(GiantAtomError, ValueError):
    """A physical precondition does not hold for the requested quantity."""


class RangeError(GiantAtomError, IndexError):
    """A time or frequency outside the available data was requested."""


class NumericalError(GiantAtomError, ArithmeticError):
    """Base class for failures of a numerical procedure."""


class IterationError(NumericalError):
    """An iterative solver did not converge.

    The last iterate is kept in ``last``.
    """

    def __init__(self, message, last=None):
        self.last = last
        super().__init__(message)


class IntegrationError(NumericalError):
    """Quadrature or time stepping failed to reach the requested accuracy."""


class ConsistencyError(NumericalError):
    """A computed state violates an invariant it should satisfy by construction."""


class CapacityError(GiantAtomError, MemoryError):
    """A problem exceeds the configured size limit."""
