"""
Synthetic seismic data for the three tasks.

Gathers are linear superpositions of Ricker-wavelet events with linear or
hyperbolic moveout. Multiples follow a periodic surface-multiple approximation
(arrival time multiplied by the order + 1, alternating polarity, geometric
attenuation, slower moveout). Patches are cut at random non-overlapping
positions, rejected when too much of their content is zero, and max-abs
normalized to [-1, 1].

Two dataset families with disjoint wavelet bands and event densities stand in
for a training survey and an unseen survey.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Literal, Optional, Sequence

import numpy as np
from scipy import fft as sp_fft
import torch

from seisdiff.config import Family, Task
from seisdiff.exceptions import DataError, ValidationError
from seisdiff.utils import derive_seed, energy, keyed_rng

logger = logging.getLogger(__name__)

EventKind = Literal["linear", "hyperbolic"]
NoiseMode = Literal["exact", "cap"]

# A sample counts as zero content below this magnitude (before normalization).
ZERO_THRESHOLD = 1e-8
# Ricker wavelets are negligible beyond this many periods from their peak.
_SUPPORT_PERIODS = 1.5


# ============================================================================
# Wavelet and events
# ============================================================================

def ricker_at(tau: np.ndarray, peak_freq: float) -> np.ndarray:
    """Ricker wavelet (1 - 2 pi^2 f^2 tau^2) exp(-pi^2 f^2 tau^2) at arbitrary lags."""
    arg = (np.pi * peak_freq * tau) ** 2
    return (1.0 - 2.0 * arg) * np.exp(-arg)


def ricker(peak_freq: float, dt: float, half_length: int) -> np.ndarray:
    """
    Sampled Ricker wavelet of 2 * half_length + 1 samples, peak 1 at the center.

    Raises:
        ValidationError: Non-positive frequency, sampling interval or length
    """
    if not peak_freq > 0 or not dt > 0:
        raise ValidationError(f"peak_freq and dt must be positive, got {peak_freq}, {dt}")
    if half_length < 0:
        raise ValidationError(f"half_length must be non-negative, got {half_length}")
    tau = np.arange(-half_length, half_length + 1, dtype=np.float64) * dt
    return ricker_at(tau, peak_freq)


@dataclass(frozen=True)
class EventSpec:
    """
    One seismic event.

    velocity is the stacking velocity in m/s for hyperbolic events and the slope
    in s/m for linear events.
    """

    kind: EventKind
    t0: float
    velocity: float
    amplitude: float = 1.0
    wavelet_peak_freq: float = 20.0
    polarity: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "hyperbolic"):
            raise ValidationError(f"unknown event kind {self.kind!r}")
        if not self.t0 >= 0:
            raise ValidationError(f"t0 must be non-negative, got {self.t0}")
        if self.kind == "hyperbolic" and not self.velocity > 0:
            raise ValidationError(f"hyperbolic velocity must be positive, got {self.velocity}")
        if not math.isfinite(self.velocity) or not math.isfinite(self.amplitude):
            raise ValidationError("event velocity and amplitude must be finite")
        if not self.wavelet_peak_freq > 0:
            raise ValidationError("wavelet_peak_freq must be positive")
        if self.polarity not in (1, -1):
            raise ValidationError(f"polarity must be +1 or -1, got {self.polarity}")

    def arrival_times(self, offsets: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return self.t0 + self.velocity * offsets
        return np.sqrt(self.t0**2 + (offsets / self.velocity) ** 2)

    def support(self) -> float:
        return _SUPPORT_PERIODS / self.wavelet_peak_freq


@dataclass
class Gather:
    """2-D section, data[n_samples, n_traces], with sampling metadata and provenance."""

    data: np.ndarray
    dt: float
    dx: float
    events: list[EventSpec] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or min(self.data.shape) < 1:
            raise ValidationError(f"gather data must be 2-D and non-empty, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise DataError("gather contains non-finite values")

    @property
    def n_samples(self) -> int:
        return int(self.data.shape[0])

    @property
    def n_traces(self) -> int:
        return int(self.data.shape[1])


def _in_window(event: EventSpec, offsets: np.ndarray, n_samples: int, dt: float) -> bool:
    arrivals = event.arrival_times(offsets)
    t_max = (n_samples - 1) * dt
    return bool(np.any((arrivals + event.support() >= 0) & (arrivals - event.support() <= t_max)))


def events_in_window(
    events: Sequence[EventSpec], n_traces: int, n_samples: int, dt: float, dx: float
) -> list[EventSpec]:
    """Drop events whose arrivals fall entirely outside the recording window."""
    offsets = np.arange(n_traces) * dx
    return [e for e in events if _in_window(e, offsets, n_samples, dt)]


def synth_gather(
    events: Sequence[EventSpec],
    n_traces: int,
    n_samples: int,
    dt: float,
    dx: float,
    seed: int = 0,
    jitter: float = 0.0,
) -> Gather:
    """
    Model a gather as the superposition of wavelet-convolved events.

    Each event contributes amplitude * polarity * ricker(t - t_event(x)) on every
    trace, evaluated at the exact (fractional) arrival time. With jitter > 0 each
    event's amplitude is perturbed by a factor (1 + jitter * N(0, 1)) drawn from
    the stream (seed, event index).

    Raises:
        ValidationError: Invalid geometry or an event entirely outside the window
    """
    if n_traces < 1 or n_samples < 1 or not dt > 0 or not dx > 0:
        raise ValidationError(
            f"invalid geometry: n_traces={n_traces}, n_samples={n_samples}, dt={dt}, dx={dx}"
        )
    offsets = np.arange(n_traces, dtype=np.float64) * dx
    times = np.arange(n_samples, dtype=np.float64) * dt
    data = np.zeros((n_samples, n_traces), dtype=np.float64)
    for k, event in enumerate(events):
        if not _in_window(event, offsets, n_samples, dt):
            raise ValidationError(
                f"event {k} ({event.kind}, t0={event.t0}) lies entirely outside the window",
                details={"event": asdict(event)},
            )
        amplitude = event.amplitude * event.polarity
        if jitter > 0:
            amplitude *= 1.0 + jitter * keyed_rng(seed, k).standard_normal()
        arrivals = event.arrival_times(offsets)
        data += amplitude * ricker_at(times[:, None] - arrivals[None, :], event.wavelet_peak_freq)
    return Gather(data=data, dt=dt, dx=dx, events=list(events))


def add_multiples(
    primaries: Sequence[EventSpec],
    order_max: int,
    attenuation: float,
    velocity_ratio: float = 0.9,
) -> list[EventSpec]:
    """
    Append surface-multiple approximations of every primary.

    The order-k multiple of a primary arrives at (k + 1) * t0 with amplitude
    scaled by attenuation^k, polarity flipped once per bounce, and slower
    moveout: velocity * velocity_ratio^k (hyperbolic) or slope / velocity_ratio^k
    (linear).

    Returns:
        Primaries followed by their multiples
    """
    if order_max < 1:
        raise ValidationError(f"order_max must be >= 1, got {order_max}")
    if not 0 < attenuation < 1:
        raise ValidationError(f"attenuation must lie in (0, 1), got {attenuation}")
    if not 0 < velocity_ratio <= 1:
        raise ValidationError(f"velocity_ratio must lie in (0, 1], got {velocity_ratio}")
    out = list(primaries)
    for p in primaries:
        for k in range(1, order_max + 1):
            if p.kind == "hyperbolic":
                velocity = p.velocity * velocity_ratio**k
            else:
                velocity = p.velocity / velocity_ratio**k
            out.append(
                EventSpec(
                    kind=p.kind,
                    t0=(k + 1) * p.t0,
                    velocity=velocity,
                    amplitude=p.amplitude * attenuation**k,
                    wavelet_peak_freq=p.wavelet_peak_freq,
                    polarity=p.polarity * (-1) ** k,
                )
            )
    return out


# ============================================================================
# Corruptions
# ============================================================================

def add_noise(
    x: np.ndarray,
    energy_fraction: float,
    seed: int,
    mode: NoiseMode = "exact",
) -> np.ndarray:
    """
    Add white Gaussian noise scaled relative to the signal energy.

    exact: noise energy equals energy_fraction * energy(x).
    cap:   the fraction is drawn uniformly from [0, energy_fraction] first.

    Raises:
        ValidationError: Negative fraction or unknown mode
        DataError: Zero-energy input in exact mode
    """
    if not energy_fraction >= 0:
        raise ValidationError(f"energy_fraction must be non-negative, got {energy_fraction}")
    if mode not in ("exact", "cap"):
        raise ValidationError(f"unknown noise mode {mode!r}")
    if energy_fraction == 0:
        return np.array(x, copy=True)
    rng = keyed_rng(seed)
    fraction = energy_fraction if mode == "exact" else float(rng.uniform(0.0, energy_fraction))
    signal = energy(x)
    if signal == 0:
        if mode == "exact":
            raise DataError("cannot scale noise to a zero-energy input")
        return np.array(x, copy=True)
    g = rng.standard_normal(x.shape)
    n = g * math.sqrt(fraction * signal / energy(g))
    return (x.astype(np.float64) + n).astype(x.dtype, copy=False)


def decimate_traces(x: np.ndarray, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Zero round(fraction * W) randomly chosen trace columns.

    Returns:
        (masked, mask) with mask 1 on kept traces and 0 on removed ones. At least
        one trace survives whenever fraction < 1.
    """
    if not 0 <= fraction <= 1:
        raise ValidationError(f"fraction must lie in [0, 1], got {fraction}")
    width = x.shape[-1]
    n_remove = int(math.floor(fraction * width + 0.5))
    if fraction < 1:
        n_remove = min(n_remove, width - 1)
    removed = keyed_rng(seed).choice(width, size=n_remove, replace=False)
    mask = np.ones_like(x)
    mask[..., removed] = 0
    return x * mask, mask


# ============================================================================
# Patches
# ============================================================================

@dataclass(frozen=True)
class PatchWindow:
    """A normalized patch and where it was cut from."""

    data: np.ndarray
    scale: float
    gather: int
    row: int
    col: int


def zero_fraction(window: np.ndarray) -> float:
    return float(np.mean(np.abs(window) < ZERO_THRESHOLD))


def _overlaps(a: tuple[int, int], b: tuple[int, int], h: int, w: int) -> bool:
    return abs(a[0] - b[0]) < h and abs(a[1] - b[1]) < w


def find_placements(
    data: np.ndarray,
    patch_h: int,
    patch_w: int,
    max_zero_fraction: float,
    rng: np.random.Generator,
    limit: int,
    attempts: int,
    taken: Optional[list[tuple[int, int]]] = None,
) -> list[tuple[int, int]]:
    """
    Random non-overlapping (row, col) corners whose windows pass the zero-content rule.

    Windows with no sample above ZERO_THRESHOLD are always rejected, whatever
    max_zero_fraction allows.
    """
    n_rows, n_cols = data.shape
    if patch_h > n_rows or patch_w > n_cols:
        raise ValidationError(f"patch {patch_h}x{patch_w} does not fit a {n_rows}x{n_cols} gather")
    taken = [] if taken is None else taken
    found: list[tuple[int, int]] = []
    for _ in range(attempts):
        if len(found) >= limit:
            break
        corner = (int(rng.integers(n_rows - patch_h + 1)), int(rng.integers(n_cols - patch_w + 1)))
        if any(_overlaps(corner, other, patch_h, patch_w) for other in taken):
            continue
        window = data[corner[0] : corner[0] + patch_h, corner[1] : corner[1] + patch_w]
        if zero_fraction(window) > max_zero_fraction or np.max(np.abs(window)) < ZERO_THRESHOLD:
            continue
        taken.append(corner)
        found.append(corner)
    return found


def extract_patches(
    gathers: Sequence[Gather],
    patch_h: int,
    patch_w: int,
    max_zero_fraction: float = 0.4,
    seed: int = 0,
    count: Optional[int] = None,
    attempts_per_gather: int = 200,
) -> list[PatchWindow]:
    """
    Cut random, pairwise disjoint, max-abs normalized patches from gathers.

    Candidates with more than max_zero_fraction zero samples are rejected. When
    placements run out before `count` patches are found, the shorter list is
    returned and a warning logged.
    """
    patches: list[PatchWindow] = []
    for g, gather in enumerate(gathers):
        remaining = (count - len(patches)) if count is not None else attempts_per_gather
        if remaining <= 0:
            break
        corners = find_placements(
            gather.data, patch_h, patch_w, max_zero_fraction,
            keyed_rng(seed, g), remaining, attempts_per_gather,
        )
        for row, col in corners:
            window = gather.data[row : row + patch_h, col : col + patch_w]
            scale = float(np.max(np.abs(window)))
            patches.append(PatchWindow(window / scale, scale, g, row, col))
    if count is not None and len(patches) < count:
        logger.warning("Only %d of %d requested patches could be placed", len(patches), count)
    return patches


# ============================================================================
# Datasets
# ============================================================================

@dataclass(frozen=True)
class FamilyProfile:
    """Event statistics of a synthetic dataset family."""

    name: str
    peak_freq: tuple[float, float]
    n_hyperbolic: tuple[int, int]
    n_linear: tuple[int, int]
    velocity: tuple[float, float]
    slope: tuple[float, float]
    t0: tuple[float, float]
    amplitude: tuple[float, float] = (0.3, 1.0)
    n_samples: int = 256
    n_traces: int = 128
    dt: float = 0.004
    dx: float = 12.5
    multiple_order_max: int = 2
    multiple_attenuation: float = 0.5


IN_DOMAIN_PROFILE = FamilyProfile(
    name="in-domain",
    peak_freq=(12.0, 22.0),
    n_hyperbolic=(10, 16),
    n_linear=(0, 1),
    velocity=(1500.0, 3500.0),
    slope=(-2e-4, 2e-4),
    t0=(0.05, 0.95),
)

OUT_OF_DOMAIN_PROFILE = FamilyProfile(
    name="out-of-domain",
    peak_freq=(35.0, 50.0),
    n_hyperbolic=(18, 28),
    n_linear=(2, 5),
    velocity=(2500.0, 5000.0),
    slope=(-4e-4, 4e-4),
    t0=(0.02, 0.98),
    amplitude=(0.2, 1.0),
)

PROFILES = {Family.IN_DOMAIN: IN_DOMAIN_PROFILE, Family.OUT_OF_DOMAIN: OUT_OF_DOMAIN_PROFILE}
_FAMILY_KEY = {Family.IN_DOMAIN: 1, Family.OUT_OF_DOMAIN: 2}


def random_primaries(profile: FamilyProfile, rng: np.random.Generator) -> list[EventSpec]:
    """Draw the primary events of one gather."""
    events: list[EventSpec] = []
    n_hyp = int(rng.integers(profile.n_hyperbolic[0], profile.n_hyperbolic[1] + 1))
    n_lin = int(rng.integers(profile.n_linear[0], profile.n_linear[1] + 1))
    for kind, n in (("hyperbolic", n_hyp), ("linear", n_lin)):
        for _ in range(n):
            velocity = rng.uniform(*(profile.velocity if kind == "hyperbolic" else profile.slope))
            events.append(
                EventSpec(
                    kind=kind,  # type: ignore[arg-type]
                    t0=float(rng.uniform(*profile.t0)),
                    velocity=float(velocity),
                    amplitude=float(rng.uniform(*profile.amplitude)),
                    wavelet_peak_freq=float(rng.uniform(*profile.peak_freq)),
                    polarity=int(rng.choice([-1, 1])),
                )
            )
    return events


@dataclass
class PatchDataset:
    """
    Paired training/evaluation patches for one task.

    targets: (N, H, W) float32 in [-1, 1]; conditions: (N, k, H, W) float32.
    """

    task: Task
    family: Family
    seed: int
    targets: np.ndarray
    conditions: np.ndarray
    scales: np.ndarray
    dt: float
    dx: float
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.task = Task(self.task)
        self.family = Family(self.family)
        n = self.targets.shape[0]
        if self.targets.ndim != 3:
            raise ValidationError(f"targets must be (N, H, W), got {self.targets.shape}")
        expected = (n, self.task.cond_channels, *self.targets.shape[1:])
        if self.conditions.shape != expected:
            raise ValidationError(
                f"conditions shape {self.conditions.shape} != expected {expected}"
            )
        if self.scales.shape != (n,):
            raise ValidationError("one normalization factor per patch is required")

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    def __getitem__(self, i: int) -> tuple[torch.Tensor, Any]:
        from seisdiff.denoiser import Conditioning

        x0 = torch.from_numpy(np.array(self.targets[i], dtype=np.float32))
        cond = Conditioning(self.task, torch.from_numpy(np.array(self.conditions[i], dtype=np.float32)))
        return x0, cond

    @property
    def patch_shape(self) -> tuple[int, int]:
        return (int(self.targets.shape[1]), int(self.targets.shape[2]))

    def subset(self, indices: Sequence[int]) -> "PatchDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return PatchDataset(
            task=self.task, family=self.family, seed=self.seed,
            targets=self.targets[idx], conditions=self.conditions[idx], scales=self.scales[idx],
            dt=self.dt, dx=self.dx, provenance=dict(self.provenance),
        )


def build_dataset(
    task: Task,
    family: Family,
    count: int,
    seed: int,
    *,
    patch_shape: tuple[int, int] = (64, 64),
    max_zero_fraction: float = 0.4,
    noise_fraction: float = 0.5,
    noise_mode: NoiseMode = "exact",
    decimation: float = 0.5,
    patches_per_gather: int = 8,
    profile: Optional[FamilyProfile] = None,
) -> PatchDataset:
    """
    Generate `count` patch pairs for a task from a dataset family.

    demultiple:  multiple-infested input -> multiple-free target
    denoise:     target + white noise at noise_fraction of its energy -> target
    interpolate: decimated target + mask -> target

    Every gather g is generated from streams keyed by (seed, family, g), so the
    dataset is a pure function of its arguments.

    Raises:
        ValidationError: count < 1 or unknown task/family
        DataError: The generator cannot place enough patches
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    try:
        task = Task(task)
        family = Family(family)
    except ValueError as e:
        raise ValidationError(str(e)) from e
    profile = profile or PROFILES[family]
    fam = _FAMILY_KEY[family]
    patch_h, patch_w = patch_shape

    targets: list[np.ndarray] = []
    conditions: list[np.ndarray] = []
    scales: list[float] = []
    max_gathers = 10 * count + 100
    g = 0
    while len(targets) < count:
        if g >= max_gathers:
            raise DataError(
                f"placed only {len(targets)} of {count} patches after {g} gathers",
                details={"profile": profile.name},
            )
        rng = keyed_rng(seed, fam, g, 0)
        primaries = random_primaries(profile, rng)
        geometry = (profile.n_traces, profile.n_samples, profile.dt, profile.dx)
        clean = synth_gather(events_in_window(primaries, *geometry), *geometry).data
        infested = None
        if task is Task.DEMULTIPLE:
            full = add_multiples(
                primaries, profile.multiple_order_max, profile.multiple_attenuation
            )
            infested = synth_gather(events_in_window(full, *geometry), *geometry).data

        corners = find_placements(
            clean, patch_h, patch_w, max_zero_fraction, keyed_rng(seed, fam, g, 1),
            limit=min(patches_per_gather, count - len(targets)), attempts=25 * patches_per_gather,
        )
        for j, (row, col) in enumerate(corners):
            window = (slice(row, row + patch_h), slice(col, col + patch_w))
            target = clean[window]
            if task is Task.DEMULTIPLE:
                assert infested is not None
                observed = infested[window]
                scale = float(max(np.max(np.abs(target)), np.max(np.abs(observed))))
                cond = (observed / scale)[None]
            else:
                scale = float(np.max(np.abs(target)))
            target = target / scale
            if task is Task.DENOISE:
                cond = add_noise(target, noise_fraction, derive_seed(seed, fam, g, 2, j), noise_mode)[None]
            elif task is Task.INTERPOLATE:
                masked, mask = decimate_traces(target, decimation, derive_seed(seed, fam, g, 3, j))
                cond = np.stack([masked, mask])
            targets.append(target)
            conditions.append(cond)
            scales.append(scale)
        g += 1

    provenance = {
        "generator": "seisdiff.seismic_synth",
        "profile": asdict(profile),
        "gathers_used": g,
        "max_zero_fraction": max_zero_fraction,
        "noise_fraction": noise_fraction,
        "noise_mode": noise_mode,
        "decimation": decimation,
        "patches_per_gather": patches_per_gather,
    }
    return PatchDataset(
        task=task,
        family=family,
        seed=seed,
        targets=np.stack(targets).astype(np.float32),
        conditions=np.stack(conditions).astype(np.float32),
        scales=np.asarray(scales, dtype=np.float64),
        dt=profile.dt,
        dx=profile.dx,
        provenance=provenance,
    )


def dominant_frequency(patches: np.ndarray, dt: float) -> float:
    """Frequency (Hz) of the peak of the trace-averaged amplitude spectrum along time, DC excluded."""
    data = np.asarray(patches, dtype=np.float64)
    data = data.reshape(-1, *data.shape[-2:])
    spectrum = np.abs(sp_fft.rfft(data, axis=-2)).mean(axis=(0, 2))
    freqs = sp_fft.rfftfreq(data.shape[-2], d=dt)
    return float(freqs[1 + int(np.argmax(spectrum[1:]))])
