"""
Time-conditional U-Net denoiser eps_theta.

The noisy patch is concatenated with the task's conditioning channels at the
input; the timestep enters through a sinusoidal embedding, a two-layer
projection, and an additive per-block bias inside every residual block. A
single-head global attention layer sits once at the lowest resolution.
Convolutions zero-pad, which makes a band of about one receptive field along
each border depend on the padding.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Protocol, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from seisdiff.config import DenoiserConfig, Task
from seisdiff.exceptions import ConfigurationError, ShapeMismatchError, ValidationError

Timestep = Union[int, torch.Tensor]

# Output convolution is scaled by this at initialization so the first
# predictions are close to zero.
_OUTPUT_INIT_SCALE = 1e-2


def timestep_embedding(t: Timestep, dim: int) -> torch.Tensor:
    """
    Sinusoidal timestep embedding.

    The first half holds sin(t * f_k), the second half cos(t * f_k), with
    f_k = 10000^(-k / (dim/2)) for k = 0..dim/2-1 (frequencies from 1 down to 1e-4).

    Args:
        t: Non-negative timestep (int) or (B,) tensor of timesteps
        dim: Even embedding width

    Returns:
        (dim,) for an int timestep, (B, dim) for a tensor
    """
    if dim % 2:
        raise ValidationError(f"embedding dim must be even, got {dim}")
    scalar = not isinstance(t, torch.Tensor) or t.dim() == 0
    ts = torch.as_tensor(t, dtype=torch.float64).reshape(-1)
    if (ts < 0).any():
        raise ValidationError("timesteps must be non-negative")
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float64) / half)
    args = ts[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1).to(torch.float32)
    return emb[0] if scalar else emb


@dataclass(frozen=True)
class Conditioning:
    """
    Task conditioning concatenated to the noisy patch.

    channels: (k, H, W) or (B, k, H, W) with k = 1 for demultiple/denoise (the
    corrupted input) and k = 2 for interpolation (masked input, binary mask).
    """

    task: Task
    channels: torch.Tensor

    def __post_init__(self) -> None:
        task = Task(self.task)
        object.__setattr__(self, "task", task)
        if self.channels.dim() not in (3, 4):
            raise ShapeMismatchError(
                f"conditioning must be (k, H, W) or (B, k, H, W), got {tuple(self.channels.shape)}"
            )
        k = self.channels.shape[-3]
        if k != task.cond_channels:
            raise ShapeMismatchError(
                f"task '{task.value}' expects {task.cond_channels} conditioning channel(s), got {k}"
            )
        if task is Task.INTERPOLATE:
            mask = self.channels[..., 1, :, :]
            if not torch.all((mask == 0) | (mask == 1)):
                raise ValidationError("interpolation mask channel must be binary")

    @property
    def batched(self) -> torch.Tensor:
        """Channels with a leading batch axis."""
        return self.channels if self.channels.dim() == 4 else self.channels.unsqueeze(0)

    @property
    def observed(self) -> torch.Tensor:
        """First channel (the corrupted / masked observation)."""
        return self.channels[..., 0:1, :, :] if self.channels.dim() == 4 else self.channels[0]

    @property
    def mask(self) -> torch.Tensor:
        if self.task is not Task.INTERPOLATE:
            raise ValidationError(f"task '{self.task.value}' has no mask channel")
        return self.channels[..., 1:2, :, :] if self.channels.dim() == 4 else self.channels[1]

    def to(self, dtype: torch.dtype) -> "Conditioning":
        return Conditioning(self.task, self.channels.to(dtype))

    @classmethod
    def from_arrays(cls, task: Task, *arrays: np.ndarray) -> "Conditioning":
        """Stack numpy channel arrays (each (H, W) or (B, H, W)) into a conditioning."""
        stacked = np.stack(arrays, axis=-3).astype(np.float32)
        return cls(Task(task), torch.from_numpy(stacked))


class EpsPredictor(Protocol):
    """Anything that predicts the noise component of x_t."""

    def predict_eps(self, x_t: torch.Tensor, cond: Conditioning, t: Timestep) -> torch.Tensor:
        ...


def _groups(channels: int, limit: int) -> int:
    return math.gcd(channels, limit)


class ResBlock(nn.Module):
    """GroupNorm -> SiLU -> conv, plus projected timestep embedding, twice, with a skip."""

    def __init__(self, in_ch: int, out_ch: int, embed_dim: int, num_groups: int) -> None:
        super().__init__()
        self.norm1 = nn.GroupNorm(_groups(in_ch, num_groups), in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.temb_proj = nn.Linear(embed_dim, out_ch)
        self.norm2 = nn.GroupNorm(_groups(out_ch, num_groups), out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.temb_proj(F.silu(temb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return self.skip(x) + h


class AttentionBlock(nn.Module):
    """Single-head global self-attention over all spatial positions."""

    heads = 1

    def __init__(self, channels: int, num_groups: int) -> None:
        super().__init__()
        self.norm = nn.GroupNorm(_groups(channels, num_groups), channels)
        self.qkv = nn.Conv2d(channels, 3 * channels, 1)
        self.proj = nn.Conv2d(channels, channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        q, k, v = self.qkv(self.norm(x)).reshape(b, 3, c, h * w).unbind(dim=1)
        weights = torch.softmax(torch.einsum("bci,bcj->bij", q, k) / math.sqrt(c), dim=-1)
        out = torch.einsum("bij,bcj->bci", weights, v).reshape(b, c, h, w)
        return x + self.proj(out)


class Downsample(nn.Module):
    def __init__(self, channels: int) -> None:
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, stride=2, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x)


class Upsample(nn.Module):
    def __init__(self, channels: int) -> None:
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


class Denoiser(nn.Module):
    """
    U-Net eps_theta(x_t, cond, t) with identical input and output dimensionality.

    Levels 0..depth-1 each hold `res_blocks_per_level` residual blocks followed by a
    stride-2 convolution; the bottleneck at level `depth` is
    ResBlock -> Attention -> ResBlock; the decoder upsamples, concatenates the
    skip of the matching level and runs the same number of residual blocks.
    """

    def __init__(self, config: DenoiserConfig) -> None:
        super().__init__()
        self.config = config
        c = config
        embed = c.time_embed_dim

        self.time_mlp = nn.Sequential(
            nn.Linear(embed, embed),
            nn.SiLU(),
            nn.Linear(embed, embed),
        )
        self.input_conv = nn.Conv2d(c.in_channels, c.channels_at(0), 3, padding=1)

        self.down_blocks = nn.ModuleList()
        self.downsamples = nn.ModuleList()
        ch = c.channels_at(0)
        for level in range(c.depth):
            out_ch = c.channels_at(level)
            blocks = nn.ModuleList()
            for _ in range(c.res_blocks_per_level):
                blocks.append(ResBlock(ch, out_ch, embed, c.num_groups))
                ch = out_ch
            self.down_blocks.append(blocks)
            self.downsamples.append(Downsample(ch))

        mid_ch = c.channels_at(c.depth)
        self.mid_block1 = ResBlock(ch, mid_ch, embed, c.num_groups)
        self.mid_attn = AttentionBlock(mid_ch, c.num_groups) if c.attention_at_lowest else None
        self.mid_block2 = ResBlock(mid_ch, mid_ch, embed, c.num_groups)
        ch = mid_ch

        self.upsamples = nn.ModuleList()
        self.up_blocks = nn.ModuleList()
        for level in reversed(range(c.depth)):
            skip_ch = c.channels_at(level)
            self.upsamples.append(Upsample(ch))
            blocks = nn.ModuleList()
            blocks.append(ResBlock(ch + skip_ch, skip_ch, embed, c.num_groups))
            for _ in range(c.res_blocks_per_level - 1):
                blocks.append(ResBlock(skip_ch, skip_ch, embed, c.num_groups))
            self.up_blocks.append(blocks)
            ch = skip_ch

        self.out_norm = nn.GroupNorm(_groups(ch, c.num_groups), ch)
        self.out_conv = nn.Conv2d(ch, 1, 3, padding=1)

    @property
    def multiple(self) -> int:
        """Patch sides must be divisible by this."""
        return 2 ** self.config.depth

    def forward(self, x: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        """x: (B, in_channels, H, W) already concatenated; t: (B,) timesteps."""
        temb = self.time_mlp(timestep_embedding(t, self.config.time_embed_dim).to(x.dtype))
        h = self.input_conv(x)
        skips = []
        for blocks, down in zip(self.down_blocks, self.downsamples):
            for block in blocks:
                h = block(h, temb)
            skips.append(h)
            h = down(h)
        h = self.mid_block1(h, temb)
        if self.mid_attn is not None:
            h = self.mid_attn(h)
        h = self.mid_block2(h, temb)
        for up, blocks in zip(self.upsamples, self.up_blocks):
            h = torch.cat([up(h), skips.pop()], dim=1)
            for block in blocks:
                h = block(h, temb)
        return self.out_conv(F.silu(self.out_norm(h)))

    def predict_eps(self, x_t: torch.Tensor, cond: Conditioning, t: Timestep) -> torch.Tensor:
        """
        Predict the noise in x_t.

        Args:
            x_t: (H, W) or (B, 1, H, W) noisy patch
            cond: Conditioning whose spatial shape matches x_t
            t: int timestep or (B,) tensor

        Returns:
            Tensor of the same shape as x_t
        """
        single = x_t.dim() == 2
        x = x_t[None, None] if single else x_t
        if x.dim() != 4 or x.shape[1] != 1:
            raise ShapeMismatchError(f"x_t must be (H, W) or (B, 1, H, W), got {tuple(x_t.shape)}")
        channels = cond.batched.to(dtype=x.dtype, device=x.device)
        if channels.shape[0] == 1 and x.shape[0] > 1:
            channels = channels.expand(x.shape[0], -1, -1, -1)
        if channels.shape[0] != x.shape[0] or channels.shape[-2:] != x.shape[-2:]:
            raise ShapeMismatchError(
                f"conditioning {tuple(channels.shape)} does not match x_t {tuple(x.shape)}"
            )
        if 1 + channels.shape[1] != self.config.in_channels:
            raise ShapeMismatchError(
                f"model expects {self.config.in_channels} input channels, got {1 + channels.shape[1]}"
            )
        h, w = x.shape[-2:]
        if h % self.multiple or w % self.multiple:
            raise ShapeMismatchError(f"patch sides ({h}, {w}) must be divisible by {self.multiple}")
        if isinstance(t, torch.Tensor) and t.dim() > 0:
            ts = t.to(device=x.device)
        else:
            ts = torch.full((x.shape[0],), int(t), dtype=torch.long, device=x.device)
        out = self.forward(torch.cat([x, channels], dim=1), ts)
        return out[0, 0] if single else out

    def attention_layers(self) -> list[AttentionBlock]:
        return [m for m in self.modules() if isinstance(m, AttentionBlock)]

    def named_arrays(self) -> "OrderedDict[str, np.ndarray]":
        """Parameters as numpy arrays keyed by the stable state_dict names."""
        return OrderedDict(
            (name, tensor.detach().cpu().numpy().copy()) for name, tensor in self.state_dict().items()
        )

    def load_arrays(self, arrays: "dict[str, np.ndarray]") -> None:
        """Load parameters previously produced by named_arrays."""
        expected = set(self.state_dict())
        if set(arrays) != expected:
            missing = sorted(expected - set(arrays))
            extra = sorted(set(arrays) - expected)
            raise ConfigurationError(
                "parameter names do not match the architecture",
                details={"missing": missing, "unexpected": extra},
            )
        state = {name: torch.from_numpy(np.array(value, dtype=np.float32)) for name, value in arrays.items()}
        self.load_state_dict(state, strict=True)


DenoiserParams = Denoiser


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def build_denoiser(config: DenoiserConfig, seed: int) -> Denoiser:
    """
    Build and initialize a denoiser deterministically.

    Torch's default initializers draw from the global generator; that generator is
    forked and reseeded here so building never disturbs (or depends on) global state.

    Raises:
        ConfigurationError: For invalid architectures
    """
    if config.time_embed_dim % 2:
        raise ConfigurationError(f"time_embed_dim must be even, got {config.time_embed_dim}")
    if config.in_channels < 1 or config.base_channels < 1:
        raise ConfigurationError("in_channels and base_channels must be positive")
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = Denoiser(config)
        with torch.no_grad():
            model.out_conv.weight.mul_(_OUTPUT_INIT_SCALE)
            model.out_conv.bias.zero_()
    return model


def predict_eps(params: Denoiser, x_t: torch.Tensor, cond: Conditioning, t: Timestep) -> torch.Tensor:
    """Functional form of Denoiser.predict_eps."""
    return params.predict_eps(x_t, cond, t)
