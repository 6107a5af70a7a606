"""
seisdiff Exception Hierarchy

All exceptions inherit from SeisDiffError base class. Each error carries the
exit code the command line returns when it escapes a subcommand.
"""

from typing import Any, Optional


class SeisDiffError(Exception):
    """Base exception for all seisdiff errors."""

    def __init__(
        self,
        message: str,
        exit_code: Optional[int] = None,
        details: Optional[dict[str, Any]] = None,
    ) -> None:
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)

    def __str__(self) -> str:
        return self.message

    def to_dict(self) -> dict[str, Any]:
        """Convert exception to dictionary representation."""
        return {
            "error": self.__class__.__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": self.details,
        }


# Usage Errors (exit code 2)
class ConfigurationError(SeisDiffError):
    """Raised when a configuration object or setting is invalid."""

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message, exit_code=2, details=details)


class ValidationError(SeisDiffError):
    """Raised when an argument violates an operation's precondition."""

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message, exit_code=2, details=details)


class ShapeMismatchError(ValidationError):
    """Raised when array shapes or channel counts do not line up."""

    def __init__(self, message: str = "Shape mismatch", details: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message, details=details)


class TimestepError(ValidationError):
    """Raised when a diffusion timestep is outside [1, T]."""

    def __init__(self, message: str = "Timestep out of range", details: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message, details=details)


# Data Errors (exit code 3)
class DataError(SeisDiffError):
    """Raised when input data cannot be used."""

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message, exit_code=3, details=details)


class IntegrityError(DataError):
    """Raised when a file fails magic, length or CRC verification."""

    def __init__(self, message: str = "File integrity check failed", details: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message, details=details)


class FormatVersionError(IntegrityError):
    """Raised when a file or checkpoint was written with an unsupported version."""

    def __init__(self, message: str = "Unsupported format version", details: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message, details=details)


class StorageError(DataError):
    """Raised when writing an artefact to disk fails."""

    def __init__(self, message: str = "Write failed", details: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message, details=details)


# Numeric Errors (exit code 4)
class NumericError(SeisDiffError):
    """Raised when a computation produces non-finite values."""

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message, exit_code=4, details=details)


def exit_code_for(exc: BaseException) -> int:
    """
    Map an exception to the command-line exit code.

    Args:
        exc: Exception raised by a subcommand

    Returns:
        2 for usage errors, 3 for data errors, 4 for numeric failures, 1 otherwise
    """
    if isinstance(exc, SeisDiffError) and exc.exit_code is not None:
        return exc.exit_code

    error_map: dict[type[BaseException], int] = {
        FileNotFoundError: 3,
        IsADirectoryError: 3,
        NotADirectoryError: 3,
        PermissionError: 3,
        FloatingPointError: 4,
    }
    for error_class, code in error_map.items():
        if isinstance(exc, error_class):
            return code
    return 1
