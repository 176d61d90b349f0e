"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage errors exit 1, input
errors exit 2, numerical failures exit 3.
"""


class GraspQError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GraspQError, ValueError):
    """An argument violates a documented precondition."""


class ParseError(InvalidInputError):
    """A file could not be parsed; carries the offending location."""

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class ConfigurationError(GraspQError):
    """A referenced resource (mesh id, directory) cannot be resolved."""


class NumericalError(GraspQError, RuntimeError):
    """A numerical routine failed to produce a usable result."""
