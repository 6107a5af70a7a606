"""Unit tests for the exception hierarchy and exit codes."""

import pytest

from seisdiff.exceptions import (
    ConfigurationError,
    DataError,
    FormatVersionError,
    IntegrityError,
    NumericError,
    SeisDiffError,
    ShapeMismatchError,
    StorageError,
    TimestepError,
    ValidationError,
    exit_code_for,
)


@pytest.mark.parametrize(
    "error, code",
    [
        (ConfigurationError("bad"), 2),
        (ValidationError("bad"), 2),
        (ShapeMismatchError(), 2),
        (TimestepError(), 2),
        (DataError("bad"), 3),
        (IntegrityError(), 3),
        (FormatVersionError(), 3),
        (StorageError(), 3),
        (NumericError("nan"), 4),
    ],
)
def test_exit_codes(error, code):
    assert error.exit_code == code
    assert exit_code_for(error) == code


def test_foreign_exceptions():
    assert exit_code_for(FileNotFoundError()) == 3
    assert exit_code_for(PermissionError()) == 3
    assert exit_code_for(FloatingPointError()) == 4
    assert exit_code_for(RuntimeError()) == 1
    assert exit_code_for(SeisDiffError("plain")) == 1


def test_to_dict():
    error = IntegrityError("x.spd: CRC mismatch at offset 15", details={"offset": 15})
    assert error.to_dict() == {
        "error": "IntegrityError",
        "message": "x.spd: CRC mismatch at offset 15",
        "exit_code": 3,
        "details": {"offset": 15},
    }
    assert str(error) == "x.spd: CRC mismatch at offset 15"


def test_hierarchy():
    assert issubclass(FormatVersionError, IntegrityError)
    assert issubclass(TimestepError, ValidationError)
    assert issubclass(StorageError, DataError)
    assert issubclass(NumericError, SeisDiffError)
