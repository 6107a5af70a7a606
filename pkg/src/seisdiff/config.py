"""
seisdiff Configuration

Handles configuration from environment variables, .env files, and explicit parameters,
plus the validated configuration objects for the denoiser and the training loop.
"""

import os
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Task(str, Enum):
    """Seismic processing task a model is trained for."""

    DEMULTIPLE = "demultiple"  # multiple-infested input -> multiple-free target
    DENOISE = "denoise"  # noisy input -> clean target
    INTERPOLATE = "interpolate"  # decimated input + mask -> complete target

    @property
    def cond_channels(self) -> int:
        """Number of conditioning channels concatenated to the noisy patch."""
        return 2 if self is Task.INTERPOLATE else 1


class Family(str, Enum):
    """Synthetic dataset family."""

    IN_DOMAIN = "in"
    OUT_OF_DOMAIN = "out"

    @property
    def tag(self) -> str:
        """Human readable family tag used in manifests and reports."""
        return "in-domain" if self is Family.IN_DOMAIN else "out-of-domain"


class SeisDiffSettings(BaseSettings):
    """
    Process-level settings.

    Configuration precedence (highest to lowest):
    1. Explicit parameters
    2. Environment variables (SEISDIFF_*)
    3. .env file (disabled in test mode)
    4. Default values
    """

    model_config = SettingsConfigDict(
        env_prefix="SEISDIFF_",
        env_file=".env" if os.getenv("SEISDIFF_TEST_MODE") != "true" else None,
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    num_threads: Optional[int] = Field(
        default=None,
        description="Intra-op thread count for torch (None keeps the library default)",
        ge=1,
        le=512,
    )

    log_every: int = Field(
        default=100,
        description="Training iterations between progress log lines",
        ge=1,
    )


class DenoiserConfig(BaseModel):
    """Architecture of the time-conditional U-Net denoiser."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    in_channels: int = Field(default=2, ge=1, description="1 noisy channel + conditioning channels")
    base_channels: int = Field(default=32, ge=1, description="Channels at the full-resolution level")
    depth: int = Field(default=3, ge=1, description="Number of downsamplings")
    res_blocks_per_level: int = Field(default=2, ge=1)
    time_embed_dim: int = Field(default=128, ge=2)
    attention_at_lowest: bool = Field(default=True)
    num_groups: int = Field(default=8, ge=1, description="Upper bound on group-norm groups")

    @model_validator(mode="after")
    def _check_embedding(self) -> "DenoiserConfig":
        if self.time_embed_dim % 2:
            raise ValueError(f"time_embed_dim must be even, got {self.time_embed_dim}")
        return self

    @classmethod
    def for_task(cls, task: Task, **overrides: Any) -> "DenoiserConfig":
        """Default architecture with the input channel count wired for a task."""
        return cls(in_channels=1 + Task(task).cond_channels, **overrides)

    def channels_at(self, level: int) -> int:
        """Feature channels at a resolution level (0 = full resolution)."""
        return self.base_channels * 2 ** min(level, 2)


class TrainConfig(BaseModel):
    """Training loop configuration (full-scale defaults)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    task: Task = Field(default=Task.DENOISE)
    iterations: int = Field(default=200_000, ge=0)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=1e-4, ge=0.0)
    timesteps: int = Field(default=2000, ge=1, description="Diffusion depth T")
    beta_start: float = Field(default=1e-4, gt=0.0, lt=1.0)
    beta_end: float = Field(default=0.02, gt=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)
    checkpoint_every: int = Field(default=10_000, ge=1)
    model: DenoiserConfig = Field(description="Denoiser architecture (defaults to the task's)")

    @model_validator(mode="before")
    @classmethod
    def _default_model(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("model") is None:
            task = Task(data.get("task", Task.DENOISE))
            data = {**data, "model": DenoiserConfig.for_task(task)}
        return data

    @model_validator(mode="after")
    def _wire_model(self) -> "TrainConfig":
        expected = 1 + self.task.cond_channels
        if self.model.in_channels != expected:
            raise ValueError(
                f"task '{self.task.value}' needs in_channels={expected}, got {self.model.in_channels}"
            )
        if self.beta_start > self.beta_end:
            raise ValueError("beta_start must not exceed beta_end")
        return self

    @classmethod
    def desk(cls, task: Task = Task.DENOISE, **overrides: Any) -> "TrainConfig":
        """Desk-scale profile: 2000 iterations over a 200-step schedule."""
        params: dict[str, Any] = {"task": task, "iterations": 2000, "timesteps": 200}
        params.update(overrides)
        return cls(**params)
