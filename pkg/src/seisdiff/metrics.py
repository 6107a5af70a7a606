"""
Image-quality metrics (SSIM, SNR) and their aggregation into reports.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import signal

from seisdiff.exceptions import DataError, SeisDiffError, ShapeMismatchError, ValidationError
from seisdiff.types import ReportSummary
from seisdiff.utils import atomic_write_text, energy, write_json

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(ref: np.ndarray, est: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(ref, dtype=np.float64)
    b = np.asarray(est, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"reference {a.shape} and estimate {b.shape} differ in shape")
    return a, b


def snr(ref: np.ndarray, est: np.ndarray) -> float:
    """
    Signal-to-noise ratio 10 log10(sum ref^2 / sum (ref - est)^2) in dB.

    Returns:
        +inf when est equals ref exactly

    Raises:
        ShapeMismatchError: Shapes differ
        DataError: Reference has zero energy
    """
    a, b = _pair(ref, est)
    signal_energy = energy(a)
    if signal_energy == 0:
        raise DataError("SNR is undefined for a zero-energy reference")
    error_energy = energy(a - b)
    if error_energy == 0:
        return math.inf
    return 10.0 * math.log10(signal_energy / error_energy)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 2-D Gaussian window (sums to 1)."""
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    window = np.outer(g, g)
    return window / window.sum()


def ssim(ref: np.ndarray, est: np.ndarray, data_range: Optional[float] = None) -> float:
    """
    Mean structural similarity over all valid 11x11 window positions.

    Args:
        ref: Reference patch, at least 11x11
        est: Estimate of the same shape
        data_range: Dynamic range L; defaults to max(ref) - min(ref). Pass a fixed
            value to make the index symmetric in its arguments.

    Raises:
        ShapeMismatchError: Shapes differ
        ValidationError: Inputs smaller than the window
    """
    a, b = _pair(ref, est)
    if a.ndim != 2 or a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValidationError(f"SSIM needs 2-D inputs of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}")
    L = float(a.max() - a.min()) if data_range is None else float(data_range)
    c1 = (SSIM_K1 * L) ** 2
    c2 = (SSIM_K2 * L) ** 2

    window = gaussian_window()
    mu_a = signal.convolve(a, window, mode="valid")
    mu_b = signal.convolve(b, window, mode="valid")
    var_a = signal.convolve(a * a, window, mode="valid") - mu_a**2
    var_b = signal.convolve(b * b, window, mode="valid") - mu_b**2
    cov = signal.convolve(a * b, window, mode="valid") - mu_a * mu_b

    numerator = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    denominator = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    if np.any(denominator == 0):
        # Constant patches with L = 0: identical windows are perfectly similar.
        same = np.isclose(mu_a, mu_b) & (denominator == 0)
        ratio = np.where(same, 1.0, numerator / np.where(denominator == 0, 1.0, denominator))
        return float(ratio.mean())
    return float((numerator / denominator).mean())


class SampleMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    ssim: float
    snr_db: float


class MetricsReport(BaseModel):
    """
    Per-sample SSIM/SNR with population mean and standard deviation.

    Infinite SNR samples (est == ref) are excluded from the SNR aggregates and
    counted in snr_excluded; when every sample is excluded the SNR aggregates are None.
    """

    model_config = ConfigDict(frozen=True)

    per_sample: list[SampleMetrics] = Field(min_length=1)
    ssim_mean: float
    ssim_std: float = Field(ge=0.0)
    snr_mean: Optional[float]
    snr_std: Optional[float] = Field(default=None, ge=0.0)
    snr_excluded: int = Field(default=0, ge=0)
    method: str
    family: str

    @model_validator(mode="after")
    def _check_excluded(self) -> "MetricsReport":
        infinite = sum(1 for row in self.per_sample if math.isinf(row.snr_db))
        if infinite != self.snr_excluded:
            raise ValueError(f"snr_excluded={self.snr_excluded} but {infinite} rows are infinite")
        return self

    def summary(self) -> ReportSummary:
        return {
            "method": self.method,
            "family": self.family,
            "count": len(self.per_sample),
            "ssim_mean": self.ssim_mean,
            "ssim_std": self.ssim_std,
            "snr_mean": self.snr_mean,
            "snr_std": self.snr_std,
            "snr_excluded": self.snr_excluded,
        }

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["id", "ssim", "snr_db"])
        for row in self.per_sample:
            writer.writerow([row.id, repr(row.ssim), repr(row.snr_db)])
        return buffer.getvalue()

    def write(self, csv_path: Path) -> tuple[Path, Path]:
        """Write the CSV rows and a JSON summary next to them (same stem, .json)."""
        csv_path = Path(csv_path)
        json_path = csv_path.with_suffix(".json")
        atomic_write_text(csv_path, self.to_csv())
        write_json(json_path, self.summary())
        return csv_path, json_path


def aggregate(
    rows: Sequence[SampleMetrics], method_tag: str, family_tag: str
) -> MetricsReport:
    """Population mean/std (ddof 0) of per-sample rows."""
    ssims = np.array([row.ssim for row in rows], dtype=np.float64)
    snrs = np.array([row.snr_db for row in rows], dtype=np.float64)
    finite = snrs[np.isfinite(snrs)]
    excluded = int(snrs.size - finite.size)
    if excluded:
        logger.info("Excluded %d infinite-SNR sample(s) from the SNR aggregates", excluded)
    return MetricsReport(
        per_sample=list(rows),
        ssim_mean=float(ssims.mean()),
        ssim_std=float(ssims.std()),
        snr_mean=float(finite.mean()) if finite.size else None,
        snr_std=float(finite.std()) if finite.size else None,
        snr_excluded=excluded,
        method=method_tag,
        family=family_tag,
    )


def evaluate(
    pairs: Sequence[tuple[np.ndarray, np.ndarray]],
    method_tag: str,
    family_tag: str,
    ids: Optional[Sequence[str]] = None,
    data_range: Optional[float] = None,
) -> MetricsReport:
    """
    Score (reference, estimate) pairs and aggregate.

    Args:
        pairs: Non-empty sequence of (ref, est) patches
        method_tag: Name of the method that produced the estimates
        family_tag: Dataset family the references come from
        ids: Sample identifiers; defaults to zero-padded indices

    Raises:
        ValidationError: Empty input or ids of the wrong length
        SeisDiffError: Per-sample failures, re-raised with the sample id
    """
    if len(pairs) == 0:
        raise ValidationError("cannot evaluate an empty set of pairs")
    if ids is None:
        ids = [f"{i:05d}" for i in range(len(pairs))]
    if len(ids) != len(pairs):
        raise ValidationError(f"{len(ids)} ids for {len(pairs)} pairs")

    rows: list[SampleMetrics] = []
    for sample_id, (ref, est) in zip(ids, pairs):
        try:
            rows.append(
                SampleMetrics(id=str(sample_id), ssim=ssim(ref, est, data_range), snr_db=snr(ref, est))
            )
        except SeisDiffError as e:
            raise e.__class__(
                f"sample {sample_id}: {e.message}", details={**e.details, "id": str(sample_id)}
            ) from e

    report = aggregate(rows, method_tag, family_tag)
    logger.info(
        "%s on %s: SSIM %.4f +/- %.4f, SNR %s over %d sample(s)",
        method_tag,
        family_tag,
        report.ssim_mean,
        report.ssim_std,
        "n/a" if report.snr_mean is None else f"{report.snr_mean:.2f} dB",
        len(rows),
    )
    return report
