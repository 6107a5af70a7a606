"""
Reverse process: ancestral sampling from x_T ~ N(0, I) down to x_0.

States are labelled the way the reverse chain is usually displayed: with T
steps, the state produced by the step at timestep t is x_{t-1}, so x_{T-1} is
the first state after the initial noise and x_0 is the output.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np
import torch

from seisdiff.config import Task
from seisdiff.denoiser import Conditioning, EpsPredictor
from seisdiff.diffusion import predicted_mean, q_sample
from seisdiff.exceptions import ShapeMismatchError, ValidationError
from seisdiff.schedule import NoiseSchedule
from seisdiff.utils import keyed_rng

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, torch.Tensor]

# Stream slots under a sampling seed: (seed, 0) initial noise, (seed, t, _STEP) the
# z of step t, (seed, t, _CLAMP) the re-noised observation at step t.
_STEP = 0
_CLAMP = 1


def _noise(shape: tuple[int, ...], like: torch.Tensor, *keys: int) -> torch.Tensor:
    draws = keyed_rng(*keys).standard_normal(shape)
    return torch.as_tensor(draws, dtype=like.dtype, device=like.device)


@torch.no_grad()
def reverse_step(
    model: EpsPredictor,
    x_t: torch.Tensor,
    cond: Conditioning,
    t: int,
    s: NoiseSchedule,
    z: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """
    One ancestral step x_t -> x_{t-1} with variance fixed to beta_tilde_t.

    Args:
        z: Standard-normal draws of x_t's shape; None or zero means no noise.
           Must be zero at t = 1.

    Raises:
        ValidationError: Non-zero z at t = 1
        ShapeMismatchError: z does not match x_t
    """
    i = s.index(t)
    if z is not None:
        if z.shape != x_t.shape:
            raise ShapeMismatchError(f"z shape {tuple(z.shape)} != x_t shape {tuple(x_t.shape)}")
        if t == 1 and bool(torch.any(z != 0)):
            raise ValidationError("the final reverse step (t=1) is deterministic; z must be zero")
    eps_pred = model.predict_eps(x_t, cond, t)
    mean = predicted_mean(x_t, eps_pred, t, s)
    if z is None or t == 1:
        return mean
    return mean + math.sqrt(s.posterior_variances[i]) * z


def clamp_known(x: ArrayLike, observed: ArrayLike, mask: ArrayLike) -> ArrayLike:
    """
    mask * observed + (1 - mask) * x, selecting elementwise.

    Works on numpy arrays and torch tensors alike.

    Raises:
        ShapeMismatchError: Shapes differ
        ValidationError: Mask is not binary
    """
    if tuple(x.shape) != tuple(observed.shape) or tuple(x.shape) != tuple(mask.shape):
        raise ShapeMismatchError(
            f"clamp_known shapes differ: {tuple(x.shape)}, {tuple(observed.shape)}, {tuple(mask.shape)}"
        )
    if isinstance(x, torch.Tensor):
        m = torch.as_tensor(mask)
        if not bool(torch.all((m == 0) | (m == 1))):
            raise ValidationError("mask must be binary")
        return torch.where(m.bool(), torch.as_tensor(observed, dtype=x.dtype), x)
    m = np.asarray(mask)
    if not np.all((m == 0) | (m == 1)):
        raise ValidationError("mask must be binary")
    return np.where(m.astype(bool), observed, x)


@dataclass
class SampleResult:
    x0: torch.Tensor
    snapshots: dict[int, torch.Tensor] = field(default_factory=dict)


@torch.no_grad()
def sample(
    model: EpsPredictor,
    cond: Conditioning,
    s: NoiseSchedule,
    seed: int,
    snapshot_ts: Iterable[int] = (),
    *,
    clamp: bool = False,
) -> SampleResult:
    """
    Run the full reverse chain for a (batch of) conditioning input(s).

    Args:
        model: Noise predictor
        cond: Conditioning, (k, H, W) for one patch or (B, k, H, W) for a batch
        s: Schedule the model was trained with
        seed: Seed of every random draw in the chain
        snapshot_ts: State labels in [0, T-1] to record
        clamp: Interpolation only; re-insert the observed traces after every step

    Returns:
        SampleResult with x0 shaped (H, W) or (B, 1, H, W) and the requested snapshots
    """
    wanted = set(int(t) for t in snapshot_ts)
    bad = sorted(t for t in wanted if not 0 <= t <= s.T - 1)
    if bad:
        raise ValidationError(f"snapshot labels must lie in [0, {s.T - 1}], got {bad}")
    if clamp and cond.task is not Task.INTERPOLATE:
        raise ValidationError("clamp applies to the interpolation task only")

    channels = cond.channels
    single = channels.dim() == 3
    shape = tuple(channels.shape[-2:]) if single else (channels.shape[0], 1, *channels.shape[-2:])
    like = channels.to(torch.float32) if not channels.is_floating_point() else channels
    x = _noise(shape, like, seed, 0)

    snapshots: dict[int, torch.Tensor] = {}
    for t in range(s.T, 0, -1):
        z = _noise(shape, x, seed, t, _STEP) if t > 1 else None
        x = reverse_step(model, x, cond, t, s, z)
        if clamp:
            observed = cond.observed.to(x.dtype)
            if t > 1:
                observed = q_sample(observed, t - 1, _noise(shape, x, seed, t, _CLAMP), s)
            x = clamp_known(x, observed, cond.mask.to(x.dtype))
        if t - 1 in wanted:
            snapshots[t - 1] = x.clone()
        if t % 100 == 0:
            logger.debug("reverse step t=%d", t)
    return SampleResult(x0=x, snapshots=snapshots)


def snapshot_distances(result: SampleResult) -> dict[int, float]:
    """RMS distance of each snapshot to the final output."""
    return {
        t: float(torch.sqrt(torch.mean((snap - result.x0) ** 2)))
        for t, snap in sorted(result.snapshots.items(), reverse=True)
    }
