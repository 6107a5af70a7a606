"""
Training loop for eps_theta with the simplified objective.

Randomness is counter-based: example i of iteration k draws its dataset index,
timestep and noise from the stream keyed by (seed, k, i), so batches are
reproducible, independent of worker scheduling, and resumable from any
checkpoint.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import numpy as np
import torch

from seisdiff.config import SeisDiffSettings, TrainConfig
from seisdiff.denoiser import Conditioning, Denoiser, build_denoiser
from seisdiff.diffusion import q_sample, simple_loss
from seisdiff.exceptions import ConfigurationError, DataError, NumericError, ValidationError
from seisdiff.schedule import NoiseSchedule, linear_schedule
from seisdiff.types import RngState
from seisdiff.utils import atomic_write_text, keyed_rng

if TYPE_CHECKING:
    from seisdiff.dataio import Checkpoint
    from seisdiff.seismic_synth import PatchDataset

logger = logging.getLogger(__name__)

LOSS_CSV = "loss.csv"
FINAL_CHECKPOINT = "final.ckpt"

# Fields that may change between a run and its resumption.
_RESUMABLE_FIELDS = {"iterations", "checkpoint_every"}


@dataclass
class Batch:
    """x0: (B, 1, H, W) targets; cond: conditioning (B, k, H, W); t, eps drawn per example."""

    x0: torch.Tensor
    cond: Conditioning
    t: torch.Tensor
    eps: torch.Tensor


def make_optimizer(model: Denoiser, learning_rate: float) -> torch.optim.Adam:
    """Adam with default moment decays."""
    return torch.optim.Adam(model.parameters(), lr=learning_rate)


def _draw_example(
    dataset: "PatchDataset", s: NoiseSchedule, seed: int, iteration: int, i: int
) -> tuple[int, int, np.ndarray]:
    rng = keyed_rng(seed, iteration, i)
    index = int(rng.integers(len(dataset)))
    t = int(rng.integers(1, s.T + 1))
    eps = rng.standard_normal(dataset.patch_shape).astype(np.float32)
    return index, t, eps


def assemble_batch(
    dataset: "PatchDataset",
    s: NoiseSchedule,
    seed: int,
    iteration: int,
    batch_size: int,
    workers: int = 1,
) -> Batch:
    """
    Draw one batch for an iteration.

    Args:
        workers: Threads used to draw examples; the result does not depend on it
    """
    if len(dataset) == 0:
        raise DataError("cannot train on an empty dataset")

    def draw(i: int) -> tuple[int, int, np.ndarray]:
        return _draw_example(dataset, s, seed, iteration, i)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            draws = list(pool.map(draw, range(batch_size)))
    else:
        draws = [draw(i) for i in range(batch_size)]

    indices = np.array([d[0] for d in draws])
    x0 = torch.from_numpy(dataset.targets[indices][:, None].astype(np.float32))
    channels = torch.from_numpy(dataset.conditions[indices].astype(np.float32))
    t = torch.tensor([d[1] for d in draws], dtype=torch.long)
    eps = torch.from_numpy(np.stack([d[2] for d in draws])[:, None])
    return Batch(x0=x0, cond=Conditioning(dataset.task, channels), t=t, eps=eps)


def batch_loss(
    model: Denoiser,
    x0: torch.Tensor,
    cond: Conditioning,
    t: torch.Tensor,
    eps: torch.Tensor,
    s: NoiseSchedule,
) -> torch.Tensor:
    """simple_loss(eps_theta(q_sample(x0, t, eps), cond, t), eps)."""
    xt = q_sample(x0, t, eps, s)
    return simple_loss(model.predict_eps(xt, cond, t), eps)


def train_step(
    model: Denoiser,
    optimizer: torch.optim.Optimizer,
    batch: Batch,
    s: NoiseSchedule,
    iteration: int = 0,
) -> float:
    """
    One optimizer update on a batch; updates `model` in place.

    Returns:
        The batch loss before the update

    Raises:
        NumericError: If the loss is not finite (the update is not applied)
    """
    if batch.x0.shape[0] == 0:
        raise ValidationError("empty batch")
    model.train()
    optimizer.zero_grad(set_to_none=True)
    loss = batch_loss(model, batch.x0, batch.cond, batch.t, batch.eps, s)
    value = float(loss.detach())
    if not math.isfinite(value):
        raise NumericError(
            f"non-finite loss {value} at iteration {iteration}",
            details={"iteration": iteration, "t": batch.t.tolist(), "loss": value},
        )
    loss.backward()
    optimizer.step()
    return value


def gradient_check(
    loss_fn: Callable[[], torch.Tensor],
    params: Sequence[torch.nn.Parameter],
    n_coords: int = 100,
    seed: int = 0,
    step: float = 1e-6,
) -> list[tuple[float, float]]:
    """
    Compare autograd against central finite differences on sampled coordinates.

    Use a float64 model; coordinates are drawn uniformly over all parameters.

    Returns:
        List of (autograd, finite_difference) pairs
    """
    params = list(params)
    for p in params:
        p.grad = None
    loss_fn().backward()
    sizes = np.array([p.numel() for p in params])
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    rng = keyed_rng(seed)
    flat = rng.choice(int(offsets[-1]), size=min(n_coords, int(offsets[-1])), replace=False)
    pairs = []
    with torch.no_grad():
        for k in flat:
            j = int(np.searchsorted(offsets, k, side="right") - 1)
            p = params[j]
            view = p.view(-1)
            pos = int(k - offsets[j])
            analytic = float(p.grad.view(-1)[pos])
            original = view[pos].item()
            view[pos] = original + step
            plus = float(loss_fn())
            view[pos] = original - step
            minus = float(loss_fn())
            view[pos] = original
            pairs.append((analytic, (plus - minus) / (2 * step)))
    return pairs


@dataclass
class TrainResult:
    model: Denoiser
    schedule: NoiseSchedule
    loss_curve: list[tuple[int, float]]
    checkpoint: Optional[Path]
    optimizer: torch.optim.Optimizer = field(repr=False)


def _format_loss_rows(rows: Sequence[tuple[int, float]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["iteration", "loss"])
    for iteration, loss in rows:
        writer.writerow([iteration, repr(float(loss))])
    return buffer.getvalue()


def read_loss_curve(path: Path) -> list[tuple[int, float]]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        return [(int(row["iteration"]), float(row["loss"])) for row in reader]


def check_resume(ckpt: "Checkpoint", config: TrainConfig) -> None:
    """
    Refuse to continue a checkpoint under a different run configuration.

    The stored RNG seed, schedule and training configuration must match `config`;
    only the iteration count and checkpoint interval may change.

    Raises:
        ConfigurationError: Naming every field that differs
    """
    stored: dict[str, object] = {
        "seed": ckpt.rng_state["seed"],
        "timesteps": ckpt.header["schedule"]["T"],
        "beta_start": ckpt.header["schedule"]["beta_start"],
        "beta_end": ckpt.header["schedule"]["beta_end"],
    }
    train_config = ckpt.train_config
    if train_config is not None:
        stored.update(train_config.model_dump(mode="json", exclude=_RESUMABLE_FIELDS))
    wanted = config.model_dump(mode="json", exclude=_RESUMABLE_FIELDS)
    differing = sorted(name for name, value in stored.items() if wanted[name] != value)
    if differing:
        raise ConfigurationError(
            f"cannot resume: {', '.join(differing)} differ from the checkpoint",
            details={name: {"checkpoint": stored[name], "requested": wanted[name]} for name in differing},
        )


def train(
    dataset: "PatchDataset",
    config: TrainConfig,
    out_dir: Optional[Path] = None,
    *,
    resume_from: Optional[Path] = None,
    settings: Optional[SeisDiffSettings] = None,
    workers: int = 1,
) -> TrainResult:
    """
    Train a denoiser on a dataset.

    Checkpoints are written every `checkpoint_every` iterations as
    `ckpt_<iteration>.ckpt` and at the end as `final.ckpt`; the loss curve is
    rewritten to `loss.csv` at each checkpoint. Resuming from a checkpoint
    restores parameters, optimizer moments and the RNG position and continues
    the loss curve exactly as an uninterrupted run would.

    Raises:
        DataError: Empty dataset or task mismatch
        NumericError: Non-finite loss
        StorageError: Checkpoint or loss-curve writes failed
    """
    from seisdiff import dataio

    settings = settings or SeisDiffSettings()
    if len(dataset) == 0:
        raise DataError("cannot train on an empty dataset")
    if dataset.task is not config.task:
        raise DataError(
            f"dataset task '{dataset.task.value}' does not match config task '{config.task.value}'",
            details={"dataset": dataset.task.value, "config": config.task.value},
        )
    multiple = 2 ** config.model.depth
    if any(side % multiple for side in dataset.patch_shape):
        raise DataError(f"patch shape {dataset.patch_shape} not divisible by {multiple}")

    s = linear_schedule(config.timesteps, config.beta_start, config.beta_end)
    model = build_denoiser(config.model, config.seed)
    optimizer = make_optimizer(model, config.learning_rate)
    curve: list[tuple[int, float]] = []
    start = 0

    if resume_from is not None:
        ckpt = dataio.load_checkpoint(resume_from)
        check_resume(ckpt, config)
        ckpt.restore(model, optimizer)
        start = ckpt.iteration
        loss_path = Path(resume_from).parent / LOSS_CSV
        if loss_path.exists():
            curve = [row for row in read_loss_curve(loss_path) if row[0] <= start]
        logger.info("Resuming from %s at iteration %d", resume_from, start)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    def save(iteration: int, name: str) -> Path:
        assert out_dir is not None
        path = out_dir / name
        rng_state: RngState = {"seed": config.seed, "iteration": iteration}
        dataio.save_checkpoint(
            path, model, s, iteration, rng_state, optimizer=optimizer, train_config=config
        )
        atomic_write_text(out_dir / LOSS_CSV, _format_loss_rows(curve))
        logger.info("Wrote checkpoint %s (iteration %d)", path, iteration)
        return path

    last: Optional[Path] = None
    for iteration in range(start + 1, config.iterations + 1):
        batch = assemble_batch(dataset, s, config.seed, iteration, config.batch_size, workers)
        loss = train_step(model, optimizer, batch, s, iteration)
        curve.append((iteration, loss))
        if iteration % settings.log_every == 0:
            logger.info("iteration %d loss %.6f", iteration, loss)
        if out_dir is not None and iteration % config.checkpoint_every == 0:
            last = save(iteration, f"ckpt_{iteration:07d}.ckpt")

    if out_dir is not None:
        last = save(max(config.iterations, start), FINAL_CHECKPOINT)
    model.eval()
    return TrainResult(model=model, schedule=s, loss_curve=curve, checkpoint=last, optimizer=optimizer)
