"""
Closed-form forward process, forward posterior, training loss and ELBO diagnostics.

Patches are torch tensors: a single patch (H, W) or a batch (B, C, H, W). A
timestep is either a Python int (shared by every element) or an integer tensor
of shape (B,) holding one timestep per example.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np
import torch
import torch.nn.functional as F

from seisdiff.exceptions import ShapeMismatchError, ValidationError
from seisdiff.schedule import NoiseSchedule, posterior_coeff_arrays
from seisdiff.utils import keyed_rng

if TYPE_CHECKING:
    from seisdiff.denoiser import Conditioning, EpsPredictor

Timestep = Union[int, torch.Tensor]


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(
            f"{what}: shapes {tuple(a.shape)} and {tuple(b.shape)} differ",
            details={"left": list(a.shape), "right": list(b.shape)},
        )


def extract(values: np.ndarray, s: NoiseSchedule, t: Timestep, like: torch.Tensor) -> torch.Tensor:
    """
    Gather per-timestep schedule values, shaped to broadcast against `like`.

    Args:
        values: 0-indexed float64 array of length T
        s: Schedule used for range checks
        t: int timestep or (B,) integer tensor
        like: Tensor whose dtype/device/rank the result follows
    """
    if isinstance(t, torch.Tensor) and t.dim() > 0:
        idx = s.check_timesteps(t.detach().cpu().numpy())
        if like.dim() == 0 or like.shape[0] != idx.shape[0]:
            raise ShapeMismatchError(
                f"{idx.shape[0]} timesteps for a batch of shape {tuple(like.shape)}"
            )
        out = torch.as_tensor(values[idx], dtype=like.dtype, device=like.device)
        return out.reshape(-1, *([1] * (like.dim() - 1)))
    i = s.index(int(t))
    return torch.as_tensor(values[i], dtype=like.dtype, device=like.device)


def q_sample(x0: torch.Tensor, t: Timestep, eps: torch.Tensor, s: NoiseSchedule) -> torch.Tensor:
    """x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps, elementwise."""
    _check_same_shape(x0, eps, "q_sample")
    sqrt_ab = extract(np.sqrt(s.alpha_bars), s, t, x0)
    sqrt_one_minus_ab = extract(np.sqrt(1.0 - s.alpha_bars), s, t, x0)
    return sqrt_ab * x0 + sqrt_one_minus_ab * eps


def q_posterior(
    x0: torch.Tensor, xt: torch.Tensor, t: Timestep, s: NoiseSchedule
) -> tuple[torch.Tensor, Union[float, torch.Tensor]]:
    """
    Mean and variance of q(x_{t-1} | x_t, x_0).

    Returns:
        (mean, variance); variance is a float for an int timestep and a
        broadcastable tensor for per-example timesteps. At t=1 the variance is 0.
    """
    _check_same_shape(x0, xt, "q_posterior")
    coef_x0, coef_xt = posterior_coeff_arrays(s)
    mean = extract(coef_x0, s, t, x0) * x0 + extract(coef_xt, s, t, x0) * xt
    if isinstance(t, torch.Tensor) and t.dim() > 0:
        return mean, extract(s.posterior_variances, s, t, x0)
    return mean, float(s.posterior_variances[s.index(int(t))])


def predicted_mean(
    xt: torch.Tensor, eps_pred: torch.Tensor, t: Timestep, s: NoiseSchedule
) -> torch.Tensor:
    """Reverse-process mean (1/sqrt(alpha_t)) * (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps)."""
    _check_same_shape(xt, eps_pred, "predicted_mean")
    recip_sqrt_alpha = extract(1.0 / np.sqrt(s.alphas), s, t, xt)
    eps_coef = extract(s.betas / np.sqrt(1.0 - s.alpha_bars), s, t, xt)
    return recip_sqrt_alpha * (xt - eps_coef * eps_pred)


def simple_loss(eps_pred: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    """Mean squared error over every element (and the batch)."""
    _check_same_shape(eps_pred, eps, "simple_loss")
    return F.mse_loss(eps_pred, eps, reduction="mean")


def gaussian_kl(
    mean1: torch.Tensor, var1: float, mean2: torch.Tensor, var2: float
) -> torch.Tensor:
    """Elementwise KL(N(mean1, var1) || N(mean2, var2)) for isotropic Gaussians, in nats."""
    if var1 <= 0.0 or var2 <= 0.0:
        raise ValidationError("variances must be positive", details={"var1": var1, "var2": var2})
    return 0.5 * (math.log(var2 / var1) + (var1 + (mean1 - mean2) ** 2) / var2 - 1.0)


def prior_kl(x0: torch.Tensor, s: NoiseSchedule) -> float:
    """
    KL(q(x_T | x_0) || N(0, I)) in nats per pixel.

    Evaluated in float64 with log1p so the tiny values of a deep schedule survive.
    """
    x = x0.detach().to(torch.float64)
    ab = float(s.alpha_bars[-1])
    kl = 0.5 * (ab * x**2 - ab - math.log1p(-ab))
    return float(kl.mean())


@dataclass(frozen=True)
class ElboTerms:
    """Per-timestep KL diagnostics; kl[i] belongs to timestep t = i + 2."""

    kl: np.ndarray
    prior: float

    @property
    def timesteps(self) -> np.ndarray:
        return np.arange(2, self.kl.shape[0] + 2)

    @property
    def total(self) -> float:
        return float(self.kl.sum() + self.prior)


@torch.no_grad()
def elbo_terms(
    x0: torch.Tensor,
    model: "EpsPredictor",
    cond: "Conditioning",
    s: NoiseSchedule,
    seed: int,
) -> ElboTerms:
    """
    Monte-Carlo ELBO diagnostics.

    For every t in [2, T] one x_t is drawn from q(x_t | x_0) with a stream keyed by
    (seed, t); the KL between the forward posterior and the model's reverse step
    (both with variance beta_tilde_t) is averaged over pixels.
    """
    kls = np.zeros(max(s.T - 1, 0), dtype=np.float64)
    for t in range(2, s.T + 1):
        noise = keyed_rng(seed, t).standard_normal(tuple(x0.shape))
        eps = torch.as_tensor(noise, dtype=x0.dtype, device=x0.device)
        xt = q_sample(x0, t, eps, s)
        mean_q, var = q_posterior(x0, xt, t, s)
        eps_pred = model.predict_eps(xt, cond, t)
        mean_p = predicted_mean(xt, eps_pred, t, s)
        kl = gaussian_kl(mean_q.double(), float(var), mean_p.double(), float(var))
        kls[t - 2] = float(kl.mean())
    return ElboTerms(kl=kls, prior=prior_kl(x0, s))
