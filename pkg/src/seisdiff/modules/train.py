"""
Training Workflow Module

Trains a denoiser on a dataset directory and writes periodic checkpoints,
final.ckpt and loss.csv into the output directory.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from seisdiff.config import DenoiserConfig, TrainConfig
from seisdiff.dataio import read_dataset
from seisdiff.exceptions import ConfigurationError, DataError, ValidationError
from seisdiff.modules.base import BaseModule
from seisdiff.modules.synth import parse_task
from seisdiff.training import TrainResult, train

PROFILES = ("full", "desk")


class TrainModule(BaseModule):
    """Model training."""

    command = "train"

    def run(
        self,
        data: str,
        out: str,
        *,
        task: Optional[str] = None,
        iters: int = 200_000,
        batch: int = 32,
        timesteps: int = 2000,
        seed: int = 0,
        profile: str = "full",
        lr: float = 1e-4,
        beta_start: float = 1e-4,
        beta_end: float = 0.02,
        checkpoint_every: int = 10_000,
        base_channels: int = 32,
        depth: int = 3,
        resume: Optional[str] = None,
        workers: int = 1,
    ) -> TrainResult:
        """
        Train on a dataset written by the synth workflow.

        The desk profile replaces iters and timesteps with 2000 and 200.

        Args:
            data: Dataset directory
            out: Output directory for checkpoints and loss.csv
            task: Expected task; defaults to the dataset's
            resume: Checkpoint to continue from

        Raises:
            ValidationError: Bad numeric arguments or profile
            DataError: Missing dataset, or task mismatch
        """
        if profile not in PROFILES:
            raise ValidationError(f"unknown profile {profile!r} (choose from {', '.join(PROFILES)})")
        for name, value in (("iters", iters), ("batch", batch), ("timesteps", timesteps),
                            ("checkpoint_every", checkpoint_every), ("workers", workers)):
            self._require_positive(name, value)
        data_dir = self._require_dir(data, "dataset")
        if resume is not None:
            self._require_file(resume, "checkpoint")

        dataset = read_dataset(data_dir)
        task_ = parse_task(task) if task is not None else dataset.task
        if task_ is not dataset.task:
            raise DataError(
                f"dataset {data_dir} holds task '{dataset.task.value}', not '{task_.value}'"
            )

        if profile == "desk":
            iters, timesteps = 2000, 200
        try:
            config = TrainConfig(
                task=task_,
                iterations=iters,
                batch_size=batch,
                learning_rate=lr,
                timesteps=timesteps,
                beta_start=beta_start,
                beta_end=beta_end,
                seed=seed,
                checkpoint_every=checkpoint_every,
                model=DenoiserConfig.for_task(task_, base_channels=base_channels, depth=depth),
            )
        except ValueError as e:
            raise ConfigurationError(f"invalid training configuration: {e}") from e

        arguments = {
            "data": str(data),
            "out": str(out),
            "task": task_.value,
            "iters": iters,
            "batch": batch,
            "timesteps": timesteps,
            "seed": seed,
            "profile": profile,
            "lr": lr,
            "beta_start": beta_start,
            "beta_end": beta_end,
            "checkpoint_every": checkpoint_every,
            "base_channels": base_channels,
            "depth": depth,
            "resume": resume,
            "workers": workers,
        }
        with self._output(out, arguments, {"seed": seed, "dataset_seed": dataset.seed}) as out_dir:
            result = train(
                dataset,
                config,
                out_dir,
                resume_from=Path(resume) if resume is not None else None,
                settings=self._settings,
                workers=workers,
            )
        return result
