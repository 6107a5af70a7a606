"""
Difference Workflow Module

Writes scaled differences (a - b) * scale of matching patch files as patch
files and PNG renderings.
"""

from __future__ import annotations

from pathlib import Path

from seisdiff.dataio import patch_files, read_patch_file, write_patch_file
from seisdiff.exceptions import DataError
from seisdiff.modules.base import BaseModule, resolve_patch_dir
from seisdiff.modules.evaluate import load_estimate
from seisdiff.rendering import DIFFERENCE_SCALE, difference, render_difference

DIFFS_DIR = "diffs"


class DiffModule(BaseModule):
    """Scaled difference images."""

    command = "diff"

    def run(
        self,
        a: str,
        b: str,
        out: str,
        *,
        scale: float = DIFFERENCE_SCALE,
        render: bool = True,
    ) -> Path:
        """
        Difference every patch file of `a` that has a namesake in `b`.

        Args:
            a: First directory (dataset, workflow output or plain directory)
            b: Second directory
            out: Output directory; diffs/NNNNN.spd and diffs/NNNNN.png
            scale: Amplitude multiplier applied to the difference
            render: Also write PNG renderings

        Returns:
            Output directory
        """
        self._require_positive("scale", scale)
        a_dir = resolve_patch_dir(self._require_dir(a, "first"))
        b_dir = resolve_patch_dir(self._require_dir(b, "second"))
        names = {p.name for p in patch_files(b_dir)}
        pairs = [(p, b_dir / p.name) for p in patch_files(a_dir) if p.name in names]
        if not pairs:
            raise DataError(f"{a_dir} and {b_dir} share no patch file names")

        arguments = {"a": str(a), "b": str(b), "out": str(out), "scale": scale, "render": render}
        with self._output(out, arguments, {}) as out_dir:
            for left, right in pairs:
                x, y = load_estimate(left), load_estimate(right)
                write_patch_file(out_dir / DIFFS_DIR / left.name, difference(x, y, scale))
                if render:
                    render_difference(out_dir / DIFFS_DIR / f"{left.stem}.png", x, y, scale)
        return out_dir
