"""
Forward-process variance schedule.

Timesteps are 1-based (t in 1..T) at the API; the stored arrays are 0-indexed,
so the value for timestep t lives at index t - 1. All arithmetic is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from seisdiff.exceptions import TimestepError, ValidationError

DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.float64)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class NoiseSchedule:
    """Precomputed beta_t, alpha_t, alpha_bar_t and posterior variances for t = 1..T."""

    T: int
    beta_start: float
    beta_end: float
    betas: np.ndarray
    alphas: np.ndarray = field(repr=False)
    alpha_bars: np.ndarray = field(repr=False)
    alpha_bars_prev: np.ndarray = field(repr=False)
    posterior_variances: np.ndarray = field(repr=False)

    def index(self, t: int) -> int:
        """Array index of timestep t; raises TimestepError outside [1, T]."""
        if isinstance(t, bool) or int(t) != t or not 1 <= int(t) <= self.T:
            raise TimestepError(
                f"timestep {t} outside [1, {self.T}]", details={"t": t, "T": self.T}
            )
        return int(t) - 1

    def check_timesteps(self, ts: np.ndarray) -> np.ndarray:
        """Validate an integer array of timesteps and return their indices."""
        ts = np.asarray(ts)
        if ts.size and (ts.min() < 1 or ts.max() > self.T):
            raise TimestepError(
                f"timesteps must lie in [1, {self.T}], got range [{ts.min()}, {ts.max()}]",
                details={"T": self.T},
            )
        return ts.astype(np.int64) - 1

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[self.index(t)])

    def metadata(self) -> dict[str, Any]:
        """Scalars that fully determine the schedule."""
        return {"T": self.T, "beta_start": self.beta_start, "beta_end": self.beta_end}

    def __len__(self) -> int:
        return self.T


def linear_schedule(
    T: int,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """
    Linear beta schedule from beta_start (t=1) to beta_end (t=T).

    Args:
        T: Number of diffusion steps
        beta_start: beta_1
        beta_end: beta_T

    Returns:
        NoiseSchedule with all derived sequences populated

    Raises:
        ValidationError: If T < 1 or the beta bounds are non-finite or out of range

    Example:
        ```python
        s = linear_schedule(2000)
        s.alpha_bars[-1]  # < 1e-8
        ```
    """
    if isinstance(T, bool) or not isinstance(T, (int, np.integer)) or T < 1:
        raise ValidationError(f"T must be a positive integer, got {T!r}")
    if not (math.isfinite(beta_start) and math.isfinite(beta_end)):
        raise ValidationError("beta bounds must be finite", details={"beta_start": beta_start, "beta_end": beta_end})
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ValidationError(
            f"need 0 < beta_start <= beta_end < 1, got beta_start={beta_start}, beta_end={beta_end}"
        )

    betas = np.linspace(beta_start, beta_end, int(T), dtype=np.float64)
    alphas = 1.0 - betas
    # cumprod multiplies sequentially, so alpha_bars[i] == alpha_bars[i-1] * alphas[i] exactly
    alpha_bars = np.cumprod(alphas)
    alpha_bars_prev = np.concatenate(([1.0], alpha_bars[:-1]))
    posterior_variances = betas * (1.0 - alpha_bars_prev) / (1.0 - alpha_bars)
    posterior_variances[0] = 0.0

    return NoiseSchedule(
        T=int(T),
        beta_start=float(beta_start),
        beta_end=float(beta_end),
        betas=_frozen(betas),
        alphas=_frozen(alphas),
        alpha_bars=_frozen(alpha_bars),
        alpha_bars_prev=_frozen(alpha_bars_prev),
        posterior_variances=_frozen(posterior_variances),
    )


def posterior_coeffs(s: NoiseSchedule, t: int) -> tuple[float, float, float]:
    """
    Coefficients of the forward posterior q(x_{t-1} | x_t, x_0).

    mean = coef_x0 * x0 + coef_xt * xt, variance = beta_tilde_t (0 at t=1).

    Returns:
        (coef_x0, coef_xt, variance)
    """
    i = s.index(t)
    beta = s.betas[i]
    ab = s.alpha_bars[i]
    ab_prev = s.alpha_bars_prev[i]
    coef_x0 = math.sqrt(ab_prev) * beta / (1.0 - ab)
    coef_xt = math.sqrt(s.alphas[i]) * (1.0 - ab_prev) / (1.0 - ab)
    return float(coef_x0), float(coef_xt), float(s.posterior_variances[i])


def posterior_coeff_arrays(s: NoiseSchedule) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (coef_x0, coef_xt) over all timesteps, 0-indexed."""
    denom = 1.0 - s.alpha_bars
    coef_x0 = np.sqrt(s.alpha_bars_prev) * s.betas / denom
    coef_xt = np.sqrt(s.alphas) * (1.0 - s.alpha_bars_prev) / denom
    return coef_x0, coef_xt
