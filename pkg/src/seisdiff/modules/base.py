"""
Base Module Class with Shared Utilities

Provides common functionality for all seisdiff workflow modules:
- Settings access
- Up-front validation of input paths
- The output lifecycle: a `.partial` marker while a workflow writes, removed
  only after every artefact and the run record are in place
- run.json records
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterator

from seisdiff.exceptions import DataError, StorageError, ValidationError
from seisdiff.runtime import get_execution_metadata
from seisdiff.types import RunRecord
from seisdiff.utils import PathLike, atomic_write_text, write_json

if TYPE_CHECKING:
    from seisdiff.config import SeisDiffSettings
    from seisdiff.workbench import Workbench

logger = logging.getLogger(__name__)

PARTIAL_MARKER = ".partial"
RUN_RECORD = "run.json"


class BaseModule:
    """
    Base class for all workflow modules.

    Features:
    - Settings access
    - Input path checks that fail before anything is written
    - Output directories guarded by a `.partial` marker
    - run.json capture of the full arguments and seeds of a run
    """

    command: str = ""

    def __init__(self, workbench: "Workbench") -> None:
        """
        Initialize base module.

        Args:
            workbench: Owning workbench
        """
        self.workbench = workbench

    @property
    def _settings(self) -> "SeisDiffSettings":
        return self.workbench.settings

    @staticmethod
    def _require_dir(path: PathLike, what: str) -> Path:
        """
        Return path as a Path, raising DataError unless it is an existing directory.

        Example:
            data = self._require_dir(data, "dataset")
        """
        p = Path(path)
        if not p.is_dir():
            raise DataError(f"{what} directory {p} does not exist", details={"path": str(p)})
        return p

    @staticmethod
    def _require_file(path: PathLike, what: str) -> Path:
        p = Path(path)
        if not p.is_file():
            raise DataError(f"{what} file {p} does not exist", details={"path": str(p)})
        return p

    @staticmethod
    def _require_positive(name: str, value: float) -> None:
        if not value > 0:
            raise ValidationError(f"{name} must be positive, got {value}")

    def _record(self, arguments: dict[str, Any], seeds: dict[str, int]) -> RunRecord:
        return {
            "command": self.command,
            "arguments": {k: (str(v) if isinstance(v, Path) else v) for k, v in arguments.items()},
            "seeds": seeds,
            "metadata": get_execution_metadata(),
        }

    @contextmanager
    def _output(
        self,
        out_dir: PathLike,
        arguments: dict[str, Any],
        seeds: dict[str, int],
        *,
        record_name: str = RUN_RECORD,
        marker_name: str = PARTIAL_MARKER,
    ) -> Iterator[Path]:
        """
        Guard a workflow's writes into out_dir.

        The marker is created before the body runs and removed after the run
        record is written. If the body raises, the marker stays behind so
        incomplete outputs are always flagged.

        Example:
            with self._output(out, arguments, {"seed": seed}) as out_dir:
                write_dataset(out_dir, dataset)
        """
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StorageError(f"cannot create output directory {out}: {e.strerror or e}") from e
        marker = out / marker_name
        atomic_write_text(marker, f"{self.command}\n")
        yield out
        write_json(out / record_name, self._record(arguments, seeds))
        marker.unlink()
        logger.info("%s finished: %s", self.command, out)


def resolve_patch_dir(path: PathLike, prefer: tuple[str, ...] = ("outputs", "targets")) -> Path:
    """
    Directory holding the patch files of a workflow output or dataset.

    A dataset resolves to its targets/, an infer/fxdecon output to its outputs/;
    any other directory is used as is.
    """
    p = Path(path)
    for name in prefer:
        if (p / name).is_dir():
            return p / name
    return p
