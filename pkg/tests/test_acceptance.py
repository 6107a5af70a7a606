"""
Desk-scale acceptance runs.

These train real models and take tens of minutes on a multi-core CPU. They are
skipped unless SEISDIFF_RUN_SLOW=true.
"""

import numpy as np
import pytest
import torch

from seisdiff.config import Family, Task, TrainConfig
from seisdiff.denoiser import Conditioning
from seisdiff.fx_baseline import fx_decon, fx_decon_patch
from seisdiff.metrics import evaluate, snr
from seisdiff.sampling import sample
from seisdiff.seismic_synth import EventSpec, Gather, add_noise, build_dataset, synth_gather
from seisdiff.training import train
from seisdiff.utils import derive_seed

pytestmark = pytest.mark.slow

TRAIN_PATCHES = 1000
HELD_OUT = 100
GENERALIZATION_PATCHES = 500
CHUNK = 50


def desk_model(task):
    data = build_dataset(task, Family.IN_DOMAIN, TRAIN_PATCHES, seed=100)
    return train(data, TrainConfig.desk(task, seed=0))


def sample_all(result, dataset, seed, clamp=False):
    outputs = []
    for c, start in enumerate(range(0, len(dataset), CHUNK)):
        channels = torch.from_numpy(dataset.conditions[start : start + CHUNK])
        cond = Conditioning(dataset.task, channels)
        x0 = sample(result.model, cond, result.schedule, derive_seed(seed, c), clamp=clamp).x0
        outputs.append(x0.numpy()[:, 0])
    return np.concatenate(outputs)


@pytest.fixture(scope="module")
def denoise_run():
    return desk_model(Task.DENOISE)


@pytest.fixture(scope="module")
def interpolate_run():
    return desk_model(Task.INTERPOLATE)


def test_desk_denoise_training_converges(denoise_run):
    losses = [loss for _, loss in denoise_run.loss_curve]
    assert len(losses) == 2000
    assert np.mean(losses[-100:]) < 0.5 * np.mean(losses[:100])


def test_desk_denoise_beats_noisy_inputs(denoise_run):
    held_out = build_dataset(Task.DENOISE, Family.IN_DOMAIN, HELD_OUT, seed=200)
    outputs = sample_all(denoise_run, held_out, seed=1)
    noisy = held_out.conditions[:, 0]
    model_report = evaluate(list(zip(held_out.targets, outputs)), "diffusion", "in-domain")
    noisy_report = evaluate(list(zip(held_out.targets, noisy)), "noisy", "in-domain")
    assert noisy_report.snr_mean == pytest.approx(3.01, abs=0.01)
    assert model_report.snr_mean > noisy_report.snr_mean
    assert model_report.ssim_mean > noisy_report.ssim_mean


def test_generalization_direction(denoise_run):
    ssim = {}
    for family in (Family.IN_DOMAIN, Family.OUT_OF_DOMAIN):
        data = build_dataset(Task.DENOISE, family, GENERALIZATION_PATCHES, seed=300)
        outputs = sample_all(denoise_run, data, seed=2)
        filtered = [fx_decon_patch(data.conditions[i, 0], data.dt, data.dx) for i in range(len(data))]
        ssim[family, "diffusion"] = evaluate(
            list(zip(data.targets, outputs)), "diffusion", family.tag
        ).ssim_mean
        ssim[family, "fxdecon"] = evaluate(
            list(zip(data.targets, filtered)), "fxdecon", family.tag
        ).ssim_mean
    diffusion_gap = ssim[Family.IN_DOMAIN, "diffusion"] - ssim[Family.OUT_OF_DOMAIN, "diffusion"]
    fx_gap = ssim[Family.IN_DOMAIN, "fxdecon"] - ssim[Family.OUT_OF_DOMAIN, "fxdecon"]
    assert diffusion_gap > 0
    assert abs(fx_gap) < abs(diffusion_gap)


def test_fx_decon_benchmark():
    dt, dx = 0.004, 12.5
    events = [
        EventSpec("linear", t0=0.15, velocity=2.0e-4, wavelet_peak_freq=25.0),
        EventSpec("linear", t0=0.45, velocity=-1.5e-4, amplitude=0.7, wavelet_peak_freq=20.0),
        EventSpec("linear", t0=0.7, velocity=0.5e-4, amplitude=0.5, polarity=-1, wavelet_peak_freq=30.0),
    ]
    clean = synth_gather(events, 64, 256, dt, dx).data
    noisy = add_noise(clean, 1.0, seed=0)
    filtered = fx_decon(Gather(noisy, dt, dx)).data
    assert snr(clean, noisy) == pytest.approx(0.0, abs=1e-9)
    assert snr(clean, filtered) >= 5.0


def test_interpolation_beats_zero_filled_inputs(interpolate_run):
    held_out = build_dataset(Task.INTERPOLATE, Family.IN_DOMAIN, HELD_OUT, seed=400)
    outputs = sample_all(interpolate_run, held_out, seed=3)
    zero_filled = held_out.conditions[:, 0]
    model_rows = evaluate(list(zip(held_out.targets, outputs)), "diffusion", "in-domain").per_sample
    input_rows = evaluate(list(zip(held_out.targets, zero_filled)), "zero-filled", "in-domain").per_sample
    wins = sum(m.ssim > z.ssim for m, z in zip(model_rows, input_rows))
    assert wins >= 0.9 * HELD_OUT


def test_clamped_interpolation_keeps_observed_traces(interpolate_run):
    held_out = build_dataset(Task.INTERPOLATE, Family.IN_DOMAIN, 10, seed=500)
    outputs = sample_all(interpolate_run, held_out, seed=4, clamp=True)
    mask = held_out.conditions[:, 1].astype(bool)
    assert np.array_equal(outputs[mask], held_out.conditions[:, 0][mask])
