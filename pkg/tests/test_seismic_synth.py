"""Unit tests for synthetic gathers, corruptions, patch extraction and datasets."""

import numpy as np
import pytest

from seisdiff.config import Family, Task
from seisdiff.exceptions import DataError, ValidationError
from seisdiff.metrics import snr
from seisdiff.sampling import clamp_known
from seisdiff.seismic_synth import (
    EventSpec,
    Gather,
    PatchDataset,
    add_multiples,
    add_noise,
    build_dataset,
    decimate_traces,
    dominant_frequency,
    events_in_window,
    extract_patches,
    ricker,
    synth_gather,
)
from seisdiff.utils import energy

DT, DX = 0.004, 12.5


# ============================================================================
# Wavelet and gathers
# ============================================================================

class TestRicker:
    def test_center_and_symmetry(self):
        w = ricker(20.0, DT, 50)
        assert w.shape == (101,)
        assert w[50] == 1.0
        assert np.allclose(w, w[::-1])

    def test_zero_mean(self):
        assert abs(ricker(20.0, DT, 50).sum()) < 1e-8

    @pytest.mark.parametrize("args", [(0.0, DT, 5), (20.0, 0.0, 5), (20.0, DT, -1)])
    def test_invalid(self, args):
        with pytest.raises(ValidationError):
            ricker(*args)


class TestSynthGather:
    def test_no_events(self):
        g = synth_gather([], n_traces=8, n_samples=32, dt=DT, dx=DX)
        assert g.data.shape == (32, 8)
        assert np.all(g.data == 0)

    def test_flat_linear_event_repeats_every_trace(self):
        event = EventSpec("linear", t0=0.1, velocity=0.0, wavelet_peak_freq=25.0)
        g = synth_gather([event], n_traces=12, n_samples=64, dt=DT, dx=DX)
        assert np.all(g.data == g.data[:, :1])
        assert int(np.argmax(g.data[:, 0])) == 25

    def test_hyperbolic_peaks_follow_moveout(self):
        event = EventSpec("hyperbolic", t0=0.4, velocity=2000.0, wavelet_peak_freq=25.0)
        g = synth_gather([event], n_traces=32, n_samples=256, dt=DT, dx=DX)
        offsets = np.arange(32) * DX
        expected = np.sqrt(0.4**2 + (offsets / 2000.0) ** 2) / DT
        picked = np.argmax(g.data, axis=0)
        assert np.all(np.abs(picked - expected) <= 1)

    def test_superposition(self):
        a = EventSpec("hyperbolic", t0=0.3, velocity=1800.0, amplitude=0.7)
        b = EventSpec("linear", t0=0.2, velocity=1e-4, amplitude=0.4, polarity=-1)
        both = synth_gather([a, b], 16, 128, DT, DX).data
        split = synth_gather([a], 16, 128, DT, DX).data + synth_gather([b], 16, 128, DT, DX).data
        assert np.allclose(both, split, atol=1e-12)

    def test_event_outside_window(self):
        late = EventSpec("hyperbolic", t0=5.0, velocity=2000.0)
        with pytest.raises(ValidationError):
            synth_gather([late], 8, 64, DT, DX)
        assert events_in_window([late], 8, 64, DT, DX) == []

    def test_invalid_geometry(self):
        with pytest.raises(ValidationError):
            synth_gather([], n_traces=0, n_samples=64, dt=DT, dx=DX)

    def test_jitter_is_seeded(self):
        event = EventSpec("hyperbolic", t0=0.2, velocity=2000.0)
        a = synth_gather([event], 8, 128, DT, DX, seed=4, jitter=0.1).data
        b = synth_gather([event], 8, 128, DT, DX, seed=4, jitter=0.1).data
        plain = synth_gather([event], 8, 128, DT, DX).data
        assert np.array_equal(a, b)
        assert not np.array_equal(a, plain)

    def test_non_finite_gather_rejected(self):
        with pytest.raises(DataError):
            Gather(data=np.full((4, 4), np.nan), dt=DT, dx=DX)


class TestEventSpec:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(kind="parabolic", t0=0.1, velocity=1.0),
            dict(kind="linear", t0=-0.1, velocity=0.0),
            dict(kind="hyperbolic", t0=0.1, velocity=0.0),
            dict(kind="linear", t0=0.1, velocity=0.0, polarity=2),
            dict(kind="linear", t0=0.1, velocity=0.0, wavelet_peak_freq=0.0),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            EventSpec(**kwargs)


class TestAddMultiples:
    def test_periodic_arrivals(self):
        primary = EventSpec("hyperbolic", t0=0.4, velocity=2000.0, amplitude=1.0)
        events = add_multiples([primary], order_max=2, attenuation=0.5)
        assert events[0] == primary
        first, second = events[1], events[2]
        assert first.t0 == pytest.approx(0.8)
        assert first.amplitude == pytest.approx(0.5)
        assert first.polarity == -1
        assert first.velocity == pytest.approx(1800.0)
        assert second.t0 == pytest.approx(1.2)
        assert second.amplitude == pytest.approx(0.25)
        assert second.polarity == 1

    def test_residual_energy_follows_first_multiple(self):
        primary = EventSpec("hyperbolic", t0=0.3, velocity=2000.0, wavelet_peak_freq=20.0)
        free = synth_gather([primary], 32, 256, DT, DX)
        infested = synth_gather(add_multiples([primary], 2, 0.6), 32, 256, DT, DX)
        residual = infested.data - free.data
        onset = int(round((2 * primary.t0 - 0.075) / DT))
        before, after = energy(residual[:onset]), energy(residual[onset:])
        assert after > 0
        assert before < 1e-9 * after
        assert energy(free.data[onset:]) < 1e-9 * energy(free.data)

    def test_linear_moveout_slows(self):
        primary = EventSpec("linear", t0=0.1, velocity=2e-4)
        multiple = add_multiples([primary], 1, 0.5)[1]
        assert multiple.velocity == pytest.approx(2e-4 / 0.9)

    def test_invalid(self):
        primary = EventSpec("linear", t0=0.1, velocity=0.0)
        with pytest.raises(ValidationError):
            add_multiples([primary], 0, 0.5)
        with pytest.raises(ValidationError):
            add_multiples([primary], 1, 1.0)


# ============================================================================
# Corruptions
# ============================================================================

class TestAddNoise:
    def test_exact_fraction(self, rng):
        x = rng.uniform(-1, 1, (64, 64))
        noisy = add_noise(x, 0.5, seed=1)
        assert energy(noisy - x) == pytest.approx(0.5 * energy(x), rel=1e-9)
        assert snr(x, noisy) == pytest.approx(3.0103, abs=1e-4)

    def test_cap_mode_stays_below_fraction(self, rng):
        x = rng.uniform(-1, 1, (32, 32))
        for seed in range(5):
            noisy = add_noise(x, 0.5, seed=seed, mode="cap")
            assert energy(noisy - x) <= 0.5 * energy(x) * (1 + 1e-9)

    def test_seeded(self, rng):
        x = rng.uniform(-1, 1, (16, 16))
        assert np.array_equal(add_noise(x, 0.3, 7), add_noise(x, 0.3, 7))
        assert not np.array_equal(add_noise(x, 0.3, 7), add_noise(x, 0.3, 8))

    def test_zero_fraction_is_identity(self, rng):
        x = rng.uniform(-1, 1, (8, 8))
        assert np.array_equal(add_noise(x, 0.0, 1), x)

    def test_zero_energy_input(self):
        with pytest.raises(DataError):
            add_noise(np.zeros((8, 8)), 0.5, 1)
        assert np.all(add_noise(np.zeros((8, 8)), 0.5, 1, mode="cap") == 0)

    def test_invalid(self, rng):
        with pytest.raises(ValidationError):
            add_noise(rng.normal(size=(4, 4)), -0.1, 1)
        with pytest.raises(ValidationError):
            add_noise(rng.normal(size=(4, 4)), 0.1, 1, mode="loud")


class TestDecimateTraces:
    def test_half_the_columns(self, rng):
        x = rng.uniform(0.5, 1.0, (16, 64))
        masked, mask = decimate_traces(x, 0.5, seed=2)
        removed = np.all(mask == 0, axis=0)
        assert removed.sum() == 32
        assert np.all(mask[:, ~removed] == 1)
        assert np.all(masked[:, removed] == 0)
        assert np.array_equal(masked[:, ~removed], x[:, ~removed])

    def test_seeds_remove_different_columns(self):
        removed = [
            frozenset(np.flatnonzero(decimate_traces(np.ones((4, 64)), 0.5, seed)[1][0] == 0))
            for seed in range(6)
        ]
        assert all(len(r) == 32 for r in removed)
        assert len(set(removed)) == 6

    def test_keeps_one_trace(self):
        _, mask = decimate_traces(np.ones((4, 4)), 0.99, seed=0)
        assert mask[0].sum() == 1

    def test_clamp_restores_observed_traces(self, rng):
        x = rng.normal(size=(8, 16))
        masked, mask = decimate_traces(x, 0.5, seed=3)
        assert np.array_equal(clamp_known(x, masked, mask), x)
        assert np.array_equal(clamp_known(np.zeros_like(x), masked, mask), masked)

    def test_invalid_fraction(self):
        with pytest.raises(ValidationError):
            decimate_traces(np.ones((4, 4)), 1.5, 0)


# ============================================================================
# Patches
# ============================================================================

class TestExtractPatches:
    def test_zero_gathers_yield_nothing(self):
        gathers = [Gather(np.zeros((64, 64)), DT, DX) for _ in range(3)]
        assert extract_patches(gathers, 16, 16, seed=0) == []

    def test_silent_window_rejected_even_when_zeros_allowed(self, caplog):
        gathers = [Gather(np.zeros((32, 32)), DT, DX)]
        patches = extract_patches(gathers, 16, 16, max_zero_fraction=1.0, count=2)
        assert patches == []
        assert "Only 0 of 2" in caplog.text

    def test_sparse_window_accepted_when_zeros_allowed(self):
        data = np.zeros((32, 32))
        data[5, 5] = 2.0
        patches = extract_patches([Gather(data, DT, DX)], 32, 32, max_zero_fraction=1.0, count=1)
        assert len(patches) == 1
        assert np.all(np.isfinite(patches[0].data))
        assert patches[0].scale == 2.0

    def test_patches_are_disjoint_and_normalized(self):
        events = [
            EventSpec("hyperbolic", t0=t0, velocity=2000.0, wavelet_peak_freq=20.0)
            for t0 in (0.1, 0.3, 0.5, 0.7, 0.9)
        ]
        gather = synth_gather(events, 64, 256, DT, DX)
        patches = extract_patches([gather], 32, 16, seed=1, count=6)
        assert patches
        for p in patches:
            assert p.data.shape == (32, 16)
            assert np.max(np.abs(p.data)) == pytest.approx(1.0)
            window = gather.data[p.row : p.row + 32, p.col : p.col + 16]
            assert np.allclose(p.data * p.scale, window)
        for i, a in enumerate(patches):
            for b in patches[i + 1 :]:
                assert abs(a.row - b.row) >= 32 or abs(a.col - b.col) >= 16

    def test_patch_larger_than_gather(self):
        with pytest.raises(ValidationError):
            extract_patches([Gather(np.ones((8, 8)), DT, DX)], 16, 16)


# ============================================================================
# Datasets
# ============================================================================

class TestBuildDataset:
    @pytest.mark.parametrize(
        "task, channels", [(Task.DEMULTIPLE, 1), (Task.DENOISE, 1), (Task.INTERPOLATE, 2)]
    )
    def test_shapes(self, task, channels):
        data = build_dataset(task, Family.IN_DOMAIN, 4, seed=1, patch_shape=(16, 16))
        assert data.targets.shape == (4, 16, 16)
        assert data.conditions.shape == (4, channels, 16, 16)
        assert np.max(np.abs(data.targets)) <= 1.0
        assert len(data) == 4 and data.patch_shape == (16, 16)

    def test_deterministic(self):
        a = build_dataset(Task.DENOISE, Family.IN_DOMAIN, 6, seed=9, patch_shape=(16, 16))
        b = build_dataset(Task.DENOISE, Family.IN_DOMAIN, 6, seed=9, patch_shape=(16, 16))
        c = build_dataset(Task.DENOISE, Family.IN_DOMAIN, 6, seed=10, patch_shape=(16, 16))
        assert a.targets.tobytes() == b.targets.tobytes()
        assert a.conditions.tobytes() == b.conditions.tobytes()
        assert a.targets.tobytes() != c.targets.tobytes()

    def test_denoise_condition_is_noisy_target(self, small_denoise_dataset):
        for x0, cond in small_denoise_dataset:
            residual = cond.channels[0].numpy() - x0.numpy()
            assert energy(residual) == pytest.approx(0.5 * energy(x0.numpy()), rel=1e-4)

    def test_interpolation_condition(self, small_interpolate_dataset):
        for x0, cond in small_interpolate_dataset:
            mask = cond.mask.numpy()
            assert set(np.unique(mask)) <= {0.0, 1.0}
            assert np.array_equal(cond.observed.numpy(), x0.numpy() * mask)

    def test_demultiple_condition_differs_from_target(self):
        data = build_dataset(Task.DEMULTIPLE, Family.IN_DOMAIN, 4, seed=2, patch_shape=(32, 32))
        assert np.max(np.abs(data.conditions)) <= 1.0 + 1e-6
        assert any(
            not np.allclose(data.conditions[i, 0], data.targets[i]) for i in range(len(data))
        )

    def test_invalid_count(self):
        with pytest.raises(ValidationError):
            build_dataset(Task.DENOISE, Family.IN_DOMAIN, 0, seed=0)

    def test_provenance(self, small_denoise_dataset):
        provenance = small_denoise_dataset.provenance
        assert provenance["profile"]["name"] == "in-domain"
        assert provenance["noise_fraction"] == 0.5

    def test_families_occupy_disjoint_bands(self):
        inside = build_dataset(Task.DENOISE, Family.IN_DOMAIN, 16, seed=4, patch_shape=(64, 64))
        outside = build_dataset(Task.DENOISE, Family.OUT_OF_DOMAIN, 16, seed=4, patch_shape=(64, 64))
        f_in = dominant_frequency(inside.targets, inside.dt)
        f_out = dominant_frequency(outside.targets, outside.dt)
        assert f_in < 28.0 < f_out

    def test_subset(self, small_denoise_dataset):
        part = small_denoise_dataset.subset([2, 5])
        assert len(part) == 2
        assert np.array_equal(part.targets[1], small_denoise_dataset.targets[5])

    def test_condition_shape_checked(self):
        with pytest.raises(ValidationError):
            PatchDataset(
                task=Task.INTERPOLATE, family=Family.IN_DOMAIN, seed=0,
                targets=np.zeros((2, 8, 8), np.float32),
                conditions=np.zeros((2, 1, 8, 8), np.float32),
                scales=np.ones(2), dt=DT, dx=DX,
            )
