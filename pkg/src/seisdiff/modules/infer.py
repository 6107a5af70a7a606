"""
Inference Workflow Module

Runs the reverse chain of a trained checkpoint on every conditioning input of a
dataset, writing outputs/NNNNN.spd and, when snapshot labels are requested, the
intermediate states plus a PNG grid per patch.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from seisdiff.config import Task
from seisdiff.dataio import load_checkpoint, patch_name, read_dataset, write_patch_file
from seisdiff.denoiser import Conditioning
from seisdiff.exceptions import DataError, NumericError, ValidationError
from seisdiff.modules.base import BaseModule
from seisdiff.sampling import sample
from seisdiff.utils import derive_seed

logger = logging.getLogger(__name__)

OUTPUTS_DIR = "outputs"
SNAPSHOTS_DIR = "snapshots"


class InferModule(BaseModule):
    """Conditional sampling from a checkpoint."""

    command = "infer"

    def run(
        self,
        ckpt: str,
        input: str,
        seed: int,
        out: str,
        *,
        snapshots: Sequence[int] = (),
        clamp: bool = False,
        batch: int = 16,
        limit: Optional[int] = None,
    ) -> Path:
        """
        Sample one output per dataset input.

        Patches are processed in chunks of `batch`; chunk c runs one batched
        chain seeded with derive_seed(seed, c), so outputs depend on the seed
        and the batch size only.

        Args:
            ckpt: Checkpoint file
            input: Dataset directory whose inputs/ condition the chain
            seed: Sampling seed
            out: Output directory
            snapshots: State labels in [0, T-1] to keep
            clamp: Interpolation only; keep the observed traces fixed
            batch: Patches per chain
            limit: Only process the first `limit` patches

        Returns:
            Output directory
        """
        ckpt_path = self._require_file(ckpt, "checkpoint")
        data_dir = self._require_dir(input, "input")
        self._require_positive("batch", batch)
        if limit is not None:
            self._require_positive("limit", limit)

        checkpoint = load_checkpoint(ckpt_path)
        s = checkpoint.schedule()
        labels = sorted({int(t) for t in snapshots}, reverse=True)
        bad = [t for t in labels if not 0 <= t <= s.T - 1]
        if bad:
            raise ValidationError(f"snapshot labels must lie in [0, {s.T - 1}], got {bad}")

        dataset = read_dataset(data_dir)
        architecture = checkpoint.architecture
        if architecture.in_channels != 1 + dataset.task.cond_channels:
            raise DataError(
                f"checkpoint expects {architecture.in_channels - 1} conditioning channel(s); "
                f"dataset task '{dataset.task.value}' has {dataset.task.cond_channels}"
            )
        if clamp and dataset.task is not Task.INTERPOLATE:
            raise ValidationError("--clamp applies to interpolation datasets only")
        multiple = 2 ** architecture.depth
        if any(side % multiple for side in dataset.patch_shape):
            raise DataError(f"patch shape {dataset.patch_shape} is not divisible by {multiple}")

        count = len(dataset) if limit is None else min(limit, len(dataset))
        model = checkpoint.build_denoiser()
        arguments = {
            "ckpt": str(ckpt),
            "input": str(input),
            "seed": seed,
            "out": str(out),
            "snapshots": labels,
            "clamp": clamp,
            "batch": batch,
            "limit": limit,
        }
        with self._output(out, arguments, {"seed": seed}) as out_dir:
            for chunk, start in enumerate(range(0, count, batch)):
                stop = min(start + batch, count)
                channels = torch.from_numpy(np.ascontiguousarray(dataset.conditions[start:stop]))
                result = sample(
                    model,
                    Conditioning(dataset.task, channels),
                    s,
                    derive_seed(seed, chunk),
                    labels,
                    clamp=clamp,
                )
                outputs = result.x0.numpy()
                if not np.all(np.isfinite(outputs)):
                    raise NumericError(f"non-finite samples in patches {start}..{stop - 1}")
                for j, i in enumerate(range(start, stop)):
                    write_patch_file(out_dir / OUTPUTS_DIR / patch_name(i), outputs[j, 0])
                    if labels:
                        states = {t: result.snapshots[t][j, 0].numpy() for t in labels}
                        self._write_snapshots(out_dir, i, states)
                logger.info("sampled patches %d..%d of %d", start, stop - 1, count)
        return out_dir

    @staticmethod
    def _write_snapshots(out_dir: Path, index: int, states: dict[int, np.ndarray]) -> None:
        from seisdiff.rendering import render_snapshot_grid

        stem = Path(patch_name(index)).stem
        for t, state in states.items():
            write_patch_file(out_dir / SNAPSHOTS_DIR / stem / f"x_{t:05d}.spd", state)
        render_snapshot_grid(out_dir / SNAPSHOTS_DIR / f"{stem}.png", states)
