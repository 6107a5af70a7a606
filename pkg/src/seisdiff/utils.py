"""
Shared utility functions for seisdiff.

These utilities are used internally across modules to:
- Derive independent, reproducible random streams from integer keys
- Write artefacts atomically (write-temp-then-rename)
- Serialize JSON canonically so reruns produce identical bytes
- Compute signal energies
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Union

import numpy as np

from seisdiff.exceptions import StorageError

PathLike = Union[str, "os.PathLike[str]"]


def keyed_rng(*keys: int) -> np.random.Generator:
    """
    Counter-based random stream keyed by a tuple of non-negative integers.

    Streams with different keys are statistically independent, and the same key
    always yields the same stream regardless of which worker draws it or when.

    Args:
        *keys: Integer key, e.g. (seed, iteration, example_index)

    Returns:
        numpy Generator backed by Philox

    Examples:
        >>> a = keyed_rng(0, 3, 1).standard_normal(2)
        >>> b = keyed_rng(0, 3, 1).standard_normal(2)
        >>> bool((a == b).all())
        True
    """
    if any(int(k) < 0 for k in keys):
        raise ValueError(f"RNG keys must be non-negative, got {keys}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in keys])))


def derive_seed(*keys: int) -> int:
    """
    Integer seed drawn from the keyed stream, for APIs that take a plain seed.

    Examples:
        >>> derive_seed(7, 1) == derive_seed(7, 1)
        True
    """
    return int(keyed_rng(*keys).integers(2**62))


def energy(x: np.ndarray) -> float:
    """Sum of squares in float64."""
    return float(np.sum(np.square(x, dtype=np.float64)))


def canonical_json(obj: Any) -> str:
    """
    Serialize to JSON with sorted keys and fixed separators.

    Examples:
        >>> canonical_json({"b": 1, "a": [1.5, 2]})
        '{"a":[1.5,2],"b":1}'
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """
    Write bytes to path atomically.

    The payload is written to a temporary file in the destination directory and
    renamed over the target, so concurrent readers never see a partial file.

    Raises:
        StorageError: If the directory is missing or the write fails
    """
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp_name, target)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as e:
        raise StorageError(
            f"Failed to write {target}: {e.strerror or e}",
            details={"path": str(target)},
        ) from e
    return target


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write UTF-8 text to path atomically."""
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: PathLike, obj: Any) -> Path:
    """Write canonical, indented JSON atomically."""
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
    return atomic_write_text(path, text)


def read_json(path: PathLike) -> Any:
    """Read a JSON document."""
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def parse_int_list(text: str) -> list[int]:
    """
    Parse a comma separated list of integers.

    Examples:
        >>> parse_int_list("199, 100,0")
        [199, 100, 0]

        >>> parse_int_list("")
        []
    """
    return [int(part) for part in text.split(",") if part.strip()]


__all__ = [
    "keyed_rng",
    "derive_seed",
    "energy",
    "canonical_json",
    "atomic_write_bytes",
    "atomic_write_text",
    "write_json",
    "read_json",
    "parse_int_list",
]
