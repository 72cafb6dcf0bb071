"""Exception types shared across the package."""

from __future__ import annotations


class InvalidModelError(ValueError):
    """Model parameters do not describe a valid Hamiltonian."""


class PauliParseError(ValueError):
    """A Pauli-sum text file could not be parsed."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ResourceCapError(RuntimeError):
    """A dense representation would exceed the configured qubit cap."""


class DomainError(ValueError):
    """Arguments violate a mathematical precondition."""


class InvalidWindowError(ValueError):
    """A frequency window does not contain enough grid points."""


class FitError(RuntimeError):
    """A decay fit could not be performed."""


class ConfigError(ValueError):
    """A run configuration failed validation."""
