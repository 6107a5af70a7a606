"""
Type definitions for seisdiff artefacts.

These are TypedDict definitions for the JSON documents the workflows write
(dataset manifests, run records, checkpoint headers, report summaries).
Functions still read and write plain dicts - these are type hints only, NOT runtime validation.

Usage:
    from seisdiff.types import DatasetManifest

    def read_manifest(path: Path) -> DatasetManifest:
        # Returns dict, but IDE knows the structure
        ...
"""

from typing import Any, Literal, TypedDict

try:
    from typing import NotRequired  # Python 3.11+
except ImportError:
    from typing_extensions import NotRequired  # Python 3.10


TaskName = Literal["demultiple", "denoise", "interpolate"]
FamilyTag = Literal["in-domain", "out-of-domain"]


# ============================================================================
# Dataset Artefacts
# ============================================================================

class DatasetManifest(TypedDict):
    """manifest.json next to a dataset's patch files (type hint only)."""
    format_version: int
    task: TaskName
    family: FamilyTag
    seed: int
    count: int
    patch_shape: list[int]  # [H, W]
    cond_channels: int
    dt: float
    dx: float
    scales: list[float]  # max-abs normalization factor per patch
    provenance: dict[str, Any]


class GatherSidecar(TypedDict):
    """JSON sidecar of a gather file (type hint only)."""
    dt: float
    dx: float
    n_events: int
    events: NotRequired[list[dict[str, Any]]]  # EventSpec fields, provenance only


# ============================================================================
# Training Artefacts
# ============================================================================

class RngState(TypedDict):
    """Counter-based RNG position: streams are keyed by (seed, iteration, example)."""
    seed: int
    iteration: int


class CheckpointHeader(TypedDict):
    """JSON header of a checkpoint file (type hint only)."""
    format_version: int
    architecture: dict[str, Any]
    schedule: dict[str, Any]  # T, beta_start, beta_end
    iteration: int
    rng_state: RngState
    optimizer_step: NotRequired[int]
    train_config: NotRequired[dict[str, Any]]


# ============================================================================
# Run and Report Artefacts
# ============================================================================

class RunRecord(TypedDict):
    """run.json written by every CLI subcommand (type hint only)."""
    command: str
    arguments: dict[str, Any]
    seeds: dict[str, int]
    metadata: dict[str, Any]


class ReportSummary(TypedDict):
    """JSON summary written next to a metrics CSV (type hint only)."""
    method: str
    family: str
    count: int
    ssim_mean: float
    ssim_std: float
    snr_mean: float | None
    snr_std: float | None
    snr_excluded: int


__all__ = [
    "TaskName",
    "FamilyTag",
    "DatasetManifest",
    "GatherSidecar",
    "RngState",
    "CheckpointHeader",
    "RunRecord",
    "ReportSummary",
]
