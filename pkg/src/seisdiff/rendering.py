"""
PNG renderings for human inspection.

Renderings are views of the patch files, never a source of truth. Images are
drawn with the Agg backend and written atomically.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Mapping, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from seisdiff.exceptions import ShapeMismatchError  # noqa: E402
from seisdiff.utils import PathLike, atomic_write_bytes  # noqa: E402

DIFFERENCE_SCALE = 3.0
_CMAP = "gray"


def _save(fig: plt.Figure, path: PathLike) -> Path:
    buffer = io.BytesIO()
    try:
        fig.savefig(buffer, format="png", dpi=100, bbox_inches="tight")
    finally:
        plt.close(fig)
    return atomic_write_bytes(path, buffer.getvalue())


def _show(ax: plt.Axes, patch: np.ndarray, clip: float, title: Optional[str]) -> None:
    ax.imshow(np.asarray(patch), cmap=_CMAP, vmin=-clip, vmax=clip, aspect="auto", interpolation="nearest")
    ax.set_xlabel("trace")
    ax.set_ylabel("sample")
    if title:
        ax.set_title(title)


def render_patch(path: PathLike, patch: np.ndarray, title: Optional[str] = None, clip: float = 1.0) -> Path:
    """Grey-scale image of an (H, W) patch, amplitudes clipped to [-clip, clip]."""
    fig, ax = plt.subplots(1, 1, figsize=(4, 4))
    _show(ax, patch, clip, title)
    return _save(fig, path)


def render_snapshot_grid(
    path: PathLike, snapshots: Mapping[int, np.ndarray], clip: float = 1.0
) -> Path:
    """One panel per reverse-chain state, from the noisiest label down to x_0."""
    labels = sorted(snapshots, reverse=True)
    fig, axes = plt.subplots(1, max(len(labels), 1), figsize=(3 * max(len(labels), 1), 3), squeeze=False)
    for ax, label in zip(axes[0], labels):
        _show(ax, np.asarray(snapshots[label]).squeeze(), clip, f"x_{label}")
        ax.set_xticks([])
        ax.set_yticks([])
        ax.set_xlabel("")
        ax.set_ylabel("")
    return _save(fig, path)


def difference(a: np.ndarray, b: np.ndarray, scale: float = DIFFERENCE_SCALE) -> np.ndarray:
    """(a - b) * scale."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"cannot difference shapes {a.shape} and {b.shape}")
    return (a - b) * scale


def render_difference(
    path: PathLike, a: np.ndarray, b: np.ndarray, scale: float = DIFFERENCE_SCALE
) -> Path:
    """Side-by-side a, b and their scaled difference on a common amplitude scale."""
    diff = difference(a, b, scale)
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.5))
    _show(axes[0], a, 1.0, "a")
    _show(axes[1], b, 1.0, "b")
    _show(axes[2], diff, 1.0, f"(a - b) x {scale:g}")
    return _save(fig, path)
