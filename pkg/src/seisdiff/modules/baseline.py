"""
FX-Decon Baseline Workflow Module

Applies FX-Decon to a dataset's inputs (first channel) or to a directory of
gather files, writing outputs/ with the same file names.
"""

from __future__ import annotations

import logging
from pathlib import Path

from seisdiff.dataio import (
    MANIFEST,
    patch_files,
    patch_name,
    read_dataset,
    read_gather,
    write_gather,
    write_patch_file,
)
from seisdiff.exceptions import DataError
from seisdiff.fx_baseline import fx_decon, fx_decon_patch, validate_params
from seisdiff.modules.base import BaseModule

logger = logging.getLogger(__name__)

OUTPUTS_DIR = "outputs"


class BaselineModule(BaseModule):
    """FX-Decon outputs for comparison with the diffusion model."""

    command = "fxdecon"

    def run(
        self,
        input: str,
        out: str,
        *,
        window: int = 64,
        filter_len: int = 4,
        prewhiten: float = 0.001,
        overlap: float = 0.5,
    ) -> Path:
        """
        Filter every input and write the results.

        Args:
            input: Dataset directory (manifest.json present) or directory of gather files
            out: Output directory
            window: Time-window length in samples
            filter_len: Prediction filter taps
            prewhiten: Diagonal damping fraction
            overlap: Window overlap fraction

        Returns:
            Output directory
        """
        in_dir = self._require_dir(input, "input")
        params = {"window_len": window, "overlap": overlap, "filter_len": filter_len,
                  "prewhitening": prewhiten}
        arguments = {
            "input": str(input),
            "out": str(out),
            "window": window,
            "filter_len": filter_len,
            "prewhiten": prewhiten,
            "overlap": overlap,
        }

        if (in_dir / MANIFEST).exists():
            dataset = read_dataset(in_dir)
            validate_params(*dataset.patch_shape, window, overlap, filter_len, prewhiten)
            with self._output(out, arguments, {}) as out_dir:
                for i in range(len(dataset)):
                    filtered = fx_decon_patch(dataset.conditions[i][0], dataset.dt, dataset.dx, **params)
                    write_patch_file(out_dir / OUTPUTS_DIR / patch_name(i), filtered)
                logger.info("FX-Decon filtered %d patch(es)", len(dataset))
            return out_dir

        files = patch_files(in_dir)
        if not files:
            raise DataError(f"{in_dir} holds neither a dataset nor gather files")
        gathers = [read_gather(path) for path in files]
        for gather in gathers:
            validate_params(gather.n_samples, gather.n_traces, window, overlap, filter_len, prewhiten)
        with self._output(out, arguments, {}) as out_dir:
            for path, gather in zip(files, gathers):
                write_gather(out_dir / OUTPUTS_DIR / path.name, fx_decon(gather, **params))
            logger.info("FX-Decon filtered %d gather(s)", len(gathers))
        return out_dir
