"""
Exception types raised by the F-RAN latency simulator.
"""

from typing import Optional


class FranSimError(Exception):
    """Base class for simulator errors."""


class ParameterError(FranSimError, ValueError):
    """An index, dimension or parameter is outside its valid domain.

    Args:
        message: Human readable description
        key: Name of the offending parameter, when there is one
    """

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(message)


class NumericDomainError(FranSimError, ArithmeticError):
    """A matrix argument is not positive definite where it has to be."""


class InstanceTooLargeError(FranSimError, ValueError):
    """An exact search was requested on an instance above its size cap."""


class ConfigError(FranSimError, ValueError):
    """A configuration file or flag could not be parsed or validated."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key is not None and key not in message:
            message = f"{key}: {message}"
        super().__init__(message)
