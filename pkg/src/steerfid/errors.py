"""Exception types shared across the package."""


class SteerfidError(Exception):
    """Base class for package errors."""


class AddressingError(SteerfidError, KeyError):
    """A subsystem label is missing or an index is out of range."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ShapeError(SteerfidError, ValueError):
    """Matrix or vector shape disagrees with the declared layout."""


class InvalidStateError(SteerfidError, ValueError):
    """Input is not a valid density matrix or unit vector."""


class CapacityError(SteerfidError, ValueError):
    """Requested problem is larger than the configured guard allows."""


class ConfigError(SteerfidError, ValueError):
    """Bad or inconsistent configuration."""


class SolverError(SteerfidError, RuntimeError):
    """A numerical solver did not reach a usable answer."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ConsistencyError(SteerfidError, RuntimeError):
    """Two routes to the same quantity disagree."""
