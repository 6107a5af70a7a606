"""
seisdiff Workbench

One object holding process settings and the workflow modules behind the CLI.
Modules are created lazily on first access.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Optional

from seisdiff.config import SeisDiffSettings
from seisdiff.exceptions import DataError, ValidationError
from seisdiff.runtime import configure_threads
from seisdiff.utils import PathLike, read_json

logger = logging.getLogger(__name__)


class Workbench:
    """
    Entry point for the disk-backed workflows.

    Example:
        ```python
        bench = Workbench()
        bench.synth.run("denoise", "in", 200, seed=0, out="runs/data")
        bench.trainer.run("runs/data", "runs/model", profile="desk")
        bench.inference.run("runs/model/final.ckpt", "runs/data", seed=0, out="runs/infer")
        report = bench.evaluation.run("runs/data", "runs/infer", "ddpm", "runs/report.csv")
        ```
    """

    def __init__(self, settings: Optional[SeisDiffSettings] = None, **overrides: Any) -> None:
        """
        Initialize the workbench.

        Args:
            settings: Process settings (defaults to environment / .env)
            **overrides: Individual settings fields, applied on top
        """
        base = settings or SeisDiffSettings()
        self._settings = base.model_copy(update=overrides) if overrides else base
        configure_threads(self._settings)

        # Module instances (lazy-loaded)
        self._synth = None
        self._trainer = None
        self._inference = None
        self._baseline = None
        self._evaluation = None
        self._differences = None

    @property
    def settings(self) -> SeisDiffSettings:
        """Get workbench settings."""
        return self._settings

    @property
    def synth(self):  # type: ignore[no-untyped-def]
        """Dataset generation."""
        if self._synth is None:
            from seisdiff.modules.synth import SynthModule

            self._synth = SynthModule(self)
        return self._synth

    @property
    def trainer(self):  # type: ignore[no-untyped-def]
        """Model training."""
        if self._trainer is None:
            from seisdiff.modules.train import TrainModule

            self._trainer = TrainModule(self)
        return self._trainer

    @property
    def inference(self):  # type: ignore[no-untyped-def]
        """Conditional sampling."""
        if self._inference is None:
            from seisdiff.modules.infer import InferModule

            self._inference = InferModule(self)
        return self._inference

    @property
    def baseline(self):  # type: ignore[no-untyped-def]
        """FX-Decon baseline."""
        if self._baseline is None:
            from seisdiff.modules.baseline import BaselineModule

            self._baseline = BaselineModule(self)
        return self._baseline

    @property
    def evaluation(self):  # type: ignore[no-untyped-def]
        """SSIM/SNR reports."""
        if self._evaluation is None:
            from seisdiff.modules.evaluate import EvaluateModule

            self._evaluation = EvaluateModule(self)
        return self._evaluation

    @property
    def differences(self):  # type: ignore[no-untyped-def]
        """Scaled difference images."""
        if self._differences is None:
            from seisdiff.modules.diff import DiffModule

            self._differences = DiffModule(self)
        return self._differences

    def module_for(self, command: str) -> Any:
        """Workflow module behind a CLI subcommand name."""
        table = {
            "synth": "synth",
            "train": "trainer",
            "infer": "inference",
            "fxdecon": "baseline",
            "eval": "evaluation",
            "diff": "differences",
        }
        if command not in table:
            raise ValidationError(f"unknown command {command!r}")
        return getattr(self, table[command])

    def replay(self, run_json: PathLike, out: Optional[str] = None) -> Any:
        """
        Re-run a recorded workflow with its recorded arguments.

        Args:
            run_json: A run.json written by any workflow
            out: Output location override (directory, or report path for eval)

        Returns:
            Whatever the workflow's run() returns
        """
        path = Path(run_json)
        if not path.is_file():
            raise DataError(f"run record {path} does not exist")
        record = read_json(path)
        try:
            command = record["command"]
            arguments = dict(record["arguments"])
        except (KeyError, TypeError) as e:
            raise DataError(f"{path} is not a run record") from e
        if out is not None:
            arguments["out"] = out
        logger.info("Replaying %s from %s", command, path)
        return self.module_for(command).run(**arguments)
