"""
Evaluation Workflow Module

Scores an estimate directory against a reference directory and writes the
MetricsReport as CSV (id,ssim,snr_db) plus a JSON summary.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np

from seisdiff.dataio import MANIFEST, patch_files, read_manifest, read_patch_file
from seisdiff.exceptions import DataError, ValidationError
from seisdiff.metrics import MetricsReport, evaluate
from seisdiff.modules.base import BaseModule, resolve_patch_dir

UNKNOWN_FAMILY = "unknown"


def load_estimate(path: Path, channel: int = 0) -> np.ndarray:
    """A 2-D estimate; 3-D files (dataset inputs) contribute one channel."""
    array = read_patch_file(path)
    if array.ndim == 3:
        if not 0 <= channel < array.shape[0]:
            raise ValidationError(f"{path} has {array.shape[0]} channel(s); channel {channel} requested")
        return array[channel]
    return array


class EvaluateModule(BaseModule):
    """SSIM/SNR reports."""

    command = "eval"

    def run(
        self,
        ref: str,
        est: str,
        tag: str,
        out: str,
        *,
        family: Optional[str] = None,
        channel: int = 0,
    ) -> MetricsReport:
        """
        Evaluate matching patch files.

        A dataset directory resolves to its targets/, an infer or fxdecon output
        directory to its outputs/. Files are matched by name; every reference
        needs an estimate.

        Args:
            ref: Reference directory
            est: Estimate directory
            tag: Method tag stored in the report
            out: Report CSV path; the summary goes next to it with a .json suffix
            family: Family tag; defaults to the reference dataset's
            channel: Channel used from 3-D estimate files

        Returns:
            The report
        """
        if not tag:
            raise ValidationError("a method tag is required")
        ref_root = self._require_dir(ref, "reference")
        est_root = self._require_dir(est, "estimate")
        ref_dir = resolve_patch_dir(ref_root, prefer=("targets",))
        est_dir = resolve_patch_dir(est_root)

        references = patch_files(ref_dir)
        if not references:
            raise DataError(f"no patch files under {ref_dir}")
        estimates = {p.name: p for p in patch_files(est_dir)}
        missing = [p.name for p in references if p.name not in estimates]
        if missing:
            raise DataError(
                f"{len(missing)} reference patch(es) have no estimate in {est_dir} (first: {missing[0]})"
            )
        if family is None:
            family = (
                read_manifest(ref_root)["family"] if (ref_root / MANIFEST).exists() else UNKNOWN_FAMILY
            )

        out_path = Path(out)
        arguments = {
            "ref": str(ref),
            "est": str(est),
            "tag": tag,
            "out": str(out),
            "family": family,
            "channel": channel,
        }
        with self._output(
            out_path.parent,
            arguments,
            {},
            record_name=f"{out_path.stem}.run.json",
            marker_name=f"{out_path.stem}.partial",
        ):
            pairs = [
                (read_patch_file(p), load_estimate(estimates[p.name], channel)) for p in references
            ]
            report = evaluate(pairs, tag, family, ids=[p.stem for p in references])
            report.write(out_path)
        return report
