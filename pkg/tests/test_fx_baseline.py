"""Unit tests for the FX-Decon baseline."""

import numpy as np
import pytest

from seisdiff.exceptions import ValidationError
from seisdiff.fx_baseline import (
    fx_decon,
    fx_decon_patch,
    prediction_filters,
    taper,
    window_starts,
)
from seisdiff.metrics import snr
from seisdiff.seismic_synth import EventSpec, Gather, add_noise, synth_gather

DT, DX = 0.004, 12.5


def linear_gather(slopes, n_traces=32, n_samples=128, t0=0.1):
    events = [
        EventSpec("linear", t0=t0 + 0.08 * k, velocity=slope, wavelet_peak_freq=25.0)
        for k, slope in enumerate(slopes)
    ]
    return synth_gather(events, n_traces, n_samples, DT, DX)


class TestWindows:
    def test_taper_is_positive(self):
        w = taper(64)
        assert np.all(w > 0)
        assert np.allclose(w, w[::-1])

    def test_window_starts(self):
        assert window_starts(256, 64, 0.5) == [0, 32, 64, 96, 128, 160, 192]
        assert window_starts(100, 64, 0.5) == [0, 32, 36]
        assert window_starts(64, 64, 0.5) == [0]


class TestPredictionFilters:
    def test_exponential_series_is_predicted(self):
        theta = 0.3
        series = np.exp(1j * theta * np.arange(24))[None, :]
        forward, backward = prediction_filters(series, 2, 1e-6)
        predicted = sum(forward[0, k] * series[0, 5 - 1 - k] for k in range(2))
        assert abs(predicted - series[0, 5]) < 1e-3
        predicted = sum(backward[0, k] * series[0, 5 + 1 + k] for k in range(2))
        assert abs(predicted - series[0, 5]) < 1e-3

    def test_prewhitening_shrinks_filters(self, rng):
        spectrum = rng.normal(size=(5, 20)) + 1j * rng.normal(size=(5, 20))
        light, _ = prediction_filters(spectrum, 3, 0.001)
        heavy, _ = prediction_filters(spectrum, 3, 0.5)
        assert np.all(np.linalg.norm(heavy, axis=1) < np.linalg.norm(light, axis=1))

    def test_zero_bins(self):
        forward, backward = prediction_filters(np.zeros((3, 10), complex), 2, 0.01)
        assert np.all(forward == 0) and np.all(backward == 0)


class TestFxDecon:
    def test_zero_gather(self):
        g = Gather(np.zeros((128, 16)), DT, DX)
        assert np.all(fx_decon(g).data == 0)

    def test_identity_path(self, rng):
        g = Gather(rng.normal(size=(200, 16)), DT, DX)
        out = fx_decon(g, predict=False)
        assert np.allclose(out.data, g.data, atol=1e-12)
        assert out.dt == g.dt and out.dx == g.dx

    def test_noiseless_linear_event_is_preserved(self):
        # one sample of moveout per trace, single window
        g = linear_gather([DT / DX], n_samples=128)
        out = fx_decon(g, window_len=128)
        rel = np.sqrt(np.sum((out.data - g.data) ** 2) / np.sum(g.data**2))
        assert rel < 0.05

    def test_attenuates_random_noise(self):
        clean = linear_gather([DT / DX, -0.5 * DT / DX], n_traces=64, n_samples=256)
        noisy = add_noise(clean.data, 1.0, seed=7)
        out = fx_decon(Gather(noisy, DT, DX))
        assert snr(clean.data, noisy) == pytest.approx(0.0, abs=1e-9)
        assert snr(clean.data, out.data) > 3.0

    def test_scale_equivariant(self, rng):
        data = rng.normal(size=(128, 16))
        a = fx_decon(Gather(data, DT, DX)).data
        b = fx_decon(Gather(3.0 * data, DT, DX)).data
        assert np.allclose(b, 3.0 * a, rtol=1e-9, atol=1e-12)

    def test_deterministic(self, rng):
        g = Gather(rng.normal(size=(128, 16)), DT, DX)
        assert np.array_equal(fx_decon(g).data, fx_decon(g).data)

    @pytest.mark.parametrize(
        "params",
        [
            dict(window_len=0),
            dict(window_len=129),
            dict(overlap=1.0),
            dict(overlap=-0.1),
            dict(filter_len=0),
            dict(filter_len=8),
            dict(prewhitening=0.0),
            dict(prewhitening=1.0),
        ],
    )
    def test_invalid_parameters(self, rng, params):
        g = Gather(rng.normal(size=(128, 16)), DT, DX)
        with pytest.raises(ValidationError):
            fx_decon(g, **params)

    def test_patch_keeps_dtype(self, rng):
        patch = rng.normal(size=(64, 32)).astype(np.float32)
        out = fx_decon_patch(patch, window_len=32)
        assert out.dtype == np.float32
        assert out.shape == patch.shape
