"""
Synthesis Workflow Module

Generates a task dataset from a synthetic family and writes it in the
dataset layout (manifest.json, targets/, inputs/), with optional PNG previews.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from seisdiff.config import Family, Task
from seisdiff.dataio import patch_name, write_dataset
from seisdiff.exceptions import ValidationError
from seisdiff.modules.base import BaseModule
from seisdiff.seismic_synth import PatchDataset, build_dataset


def parse_task(value: Any) -> Task:
    try:
        return Task(value)
    except ValueError as e:
        choices = ", ".join(t.value for t in Task)
        raise ValidationError(f"unknown task {value!r} (choose from {choices})") from e


def parse_family(value: Any) -> Family:
    for family in Family:
        if value in (family, family.value, family.tag):
            return family
    raise ValidationError(f"unknown family {value!r} (choose from in, out)")


class SynthModule(BaseModule):
    """Dataset generation."""

    command = "synth"

    def run(
        self,
        task: str,
        family: str,
        count: int,
        seed: int,
        out: str,
        *,
        patch: int = 64,
        noise_fraction: float = 0.5,
        noise_mode: str = "exact",
        decimation: float = 0.5,
        previews: int = 0,
    ) -> PatchDataset:
        """
        Build and write a dataset.

        Args:
            task: demultiple, denoise or interpolate
            family: in or out
            count: Number of patch pairs (>= 1)
            seed: Generator seed
            out: Output directory
            patch: Square patch side
            previews: Number of patches rendered to previews/ as PNG

        Returns:
            The generated dataset

        Example:
            ```python
            bench = Workbench()
            bench.synth.run("denoise", "in", 500, seed=1, out="data/denoise-in")
            ```
        """
        task_ = parse_task(task)
        family_ = parse_family(family)
        if count < 1:
            raise ValidationError(f"count must be >= 1, got {count}")
        if patch < 11:
            raise ValidationError(f"patch side must be >= 11, got {patch}")
        if noise_mode not in ("exact", "cap"):
            raise ValidationError(f"noise_mode must be 'exact' or 'cap', got {noise_mode!r}")
        if previews < 0:
            raise ValidationError("previews must be non-negative")

        arguments = {
            "task": task_.value,
            "family": family_.value,
            "count": count,
            "seed": seed,
            "out": str(out),
            "patch": patch,
            "noise_fraction": noise_fraction,
            "noise_mode": noise_mode,
            "decimation": decimation,
            "previews": previews,
        }
        with self._output(out, arguments, {"seed": seed}) as out_dir:
            dataset = build_dataset(
                task_,
                family_,
                count,
                seed,
                patch_shape=(patch, patch),
                noise_fraction=noise_fraction,
                noise_mode=noise_mode,  # type: ignore[arg-type]
                decimation=decimation,
            )
            write_dataset(out_dir, dataset)
            if previews:
                self._render_previews(out_dir, dataset, previews)
        return dataset

    @staticmethod
    def _render_previews(out_dir: Path, dataset: PatchDataset, n: int) -> None:
        from seisdiff.rendering import render_patch

        for i in range(min(n, len(dataset))):
            stem = Path(patch_name(i)).stem
            render_patch(out_dir / "previews" / f"{stem}_target.png", dataset.targets[i], "target")
            render_patch(out_dir / "previews" / f"{stem}_input.png", dataset.conditions[i][0], "input")
