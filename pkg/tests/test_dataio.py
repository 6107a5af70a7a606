"""Unit tests for the patch, gather, dataset and checkpoint file formats."""

import struct

import numpy as np
import pytest
import torch

from seisdiff.config import DenoiserConfig
from seisdiff.dataio import (
    Checkpoint,
    INPUTS_DIR,
    MANIFEST,
    TARGETS_DIR,
    decode_patch,
    encode_patch,
    load_checkpoint,
    read_dataset,
    read_gather,
    read_manifest,
    read_patch_file,
    save_checkpoint,
    write_dataset,
    write_gather,
    write_patch_file,
)
from seisdiff.denoiser import build_denoiser
from seisdiff.exceptions import (
    ConfigurationError,
    DataError,
    FormatVersionError,
    IntegrityError,
)
from seisdiff.seismic_synth import EventSpec, synth_gather
from seisdiff.training import assemble_batch, make_optimizer, train_step
from seisdiff.utils import write_json


# ============================================================================
# Patch files
# ============================================================================

class TestPatchFiles:
    def test_round_trip_is_bit_exact(self, rng, tmp_path):
        x = rng.normal(size=(16, 12)).astype(np.float32)
        path = write_patch_file(tmp_path / "a.spd", x)
        y = read_patch_file(path)
        assert y.dtype == np.float32
        assert x.tobytes() == y.tobytes()

    def test_layout(self):
        data = encode_patch(np.array([[0.5]], dtype=np.float32))
        assert len(data) == 23
        assert data[:4] == b"SPD1"
        assert struct.unpack("<HB", data[4:7]) == (1, 2)
        assert struct.unpack("<2I", data[7:15]) == (1, 1)
        assert struct.unpack("<f", data[15:19]) == (0.5,)

    def test_three_dimensional(self, rng):
        x = rng.normal(size=(2, 4, 4)).astype(np.float32)
        assert np.array_equal(decode_patch(encode_patch(x)), x)

    def test_truncated(self, rng):
        data = encode_patch(rng.normal(size=(4, 4)))
        with pytest.raises(IntegrityError) as exc_info:
            decode_patch(data[:-1], "cut.spd")
        assert "cut.spd" in str(exc_info.value)
        assert exc_info.value.details["offset"] == len(data) - 4

    def test_crc_mismatch(self, rng):
        data = bytearray(encode_patch(rng.normal(size=(4, 4))))
        data[20] ^= 0x01
        with pytest.raises(IntegrityError, match="CRC mismatch"):
            decode_patch(bytes(data))

    def test_bad_magic(self, rng):
        data = b"XXXX" + encode_patch(rng.normal(size=(2, 2)))[4:]
        with pytest.raises(IntegrityError, match="bad magic"):
            decode_patch(data)

    def test_unsupported_version(self, rng):
        data = bytearray(encode_patch(rng.normal(size=(2, 2))))
        data[4:6] = struct.pack("<H", 2)
        with pytest.raises(FormatVersionError):
            decode_patch(bytes(data))

    def test_trailing_bytes(self, rng):
        with pytest.raises(IntegrityError):
            decode_patch(encode_patch(rng.normal(size=(2, 2))) + b"\x00")

    def test_refuses_non_finite(self, tmp_path):
        with pytest.raises(DataError):
            write_patch_file(tmp_path / "bad.spd", np.array([[np.inf]]))
        assert not (tmp_path / "bad.spd").exists()

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_patch_file(tmp_path / "absent.spd")


# ============================================================================
# Gathers and datasets
# ============================================================================

class TestGathers:
    def test_round_trip_with_sidecar(self, tmp_path):
        events = [EventSpec("hyperbolic", t0=0.2, velocity=2100.0, amplitude=0.8)]
        gather = synth_gather(events, 16, 128, 0.002, 25.0)
        path = write_gather(tmp_path / "g.spd", gather)
        assert (tmp_path / "g.json").exists()
        back = read_gather(path)
        assert back.dt == 0.002 and back.dx == 25.0
        assert back.events == events
        assert np.array_equal(back.data, gather.data.astype(np.float32))

    def test_defaults_without_sidecar(self, rng, tmp_path):
        write_patch_file(tmp_path / "bare.spd", rng.normal(size=(8, 4)))
        back = read_gather(tmp_path / "bare.spd")
        assert back.dt == 0.004 and back.dx == 12.5 and back.events == []

    def test_sidecar_without_sampling_interval(self, rng, tmp_path):
        write_patch_file(tmp_path / "g.spd", rng.normal(size=(8, 4)))
        write_json(tmp_path / "g.json", {"dx": 12.5, "events": []})
        with pytest.raises(DataError, match="dt") as exc_info:
            read_gather(tmp_path / "g.spd")
        assert exc_info.value.details["missing"] == ["dt"]

    def test_unreadable_sidecar(self, rng, tmp_path):
        write_patch_file(tmp_path / "g.spd", rng.normal(size=(8, 4)))
        (tmp_path / "g.json").write_text("{not json", encoding="utf-8")
        with pytest.raises(DataError):
            read_gather(tmp_path / "g.spd")

    def test_sidecar_with_bad_event(self, rng, tmp_path):
        write_patch_file(tmp_path / "g.spd", rng.normal(size=(8, 4)))
        write_json(tmp_path / "g.json", {"dt": 0.004, "dx": 12.5, "events": [{"kind": "flat"}]})
        with pytest.raises(DataError):
            read_gather(tmp_path / "g.spd")

    def test_rejects_non_2d(self, rng, tmp_path):
        write_patch_file(tmp_path / "cube.spd", rng.normal(size=(2, 2, 2)))
        with pytest.raises(DataError):
            read_gather(tmp_path / "cube.spd")


class TestDatasets:
    def test_round_trip(self, small_interpolate_dataset, tmp_path):
        write_dataset(tmp_path / "ds", small_interpolate_dataset)
        back = read_dataset(tmp_path / "ds")
        assert back.task is small_interpolate_dataset.task
        assert back.family is small_interpolate_dataset.family
        assert np.array_equal(back.targets, small_interpolate_dataset.targets)
        assert np.array_equal(back.conditions, small_interpolate_dataset.conditions)
        assert np.array_equal(back.scales, small_interpolate_dataset.scales)

    def test_layout(self, small_denoise_dataset, tmp_path):
        write_dataset(tmp_path / "ds", small_denoise_dataset)
        manifest = read_manifest(tmp_path / "ds")
        assert manifest["count"] == 16
        assert manifest["family"] == "in-domain"
        assert manifest["cond_channels"] == 1
        assert len(list((tmp_path / "ds" / TARGETS_DIR).iterdir())) == 16
        assert (tmp_path / "ds" / INPUTS_DIR / "00015.spd").exists()
        assert read_patch_file(tmp_path / "ds" / INPUTS_DIR / "00000.spd").shape == (1, 16, 16)

    def test_rewrite_is_byte_identical(self, small_denoise_dataset, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        write_dataset(a, small_denoise_dataset)
        write_dataset(b, small_denoise_dataset)
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert all((a / f).read_bytes() == (b / f).read_bytes() for f in files)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataError):
            read_dataset(tmp_path)

    def test_manifest_version(self, small_denoise_dataset, tmp_path):
        write_dataset(tmp_path, small_denoise_dataset)
        manifest = read_manifest(tmp_path)
        manifest["format_version"] = 9
        write_json(tmp_path / MANIFEST, manifest)
        with pytest.raises(FormatVersionError):
            read_dataset(tmp_path)

    @pytest.mark.parametrize("field", ["count", "task", "scales"])
    def test_manifest_missing_field(self, small_denoise_dataset, tmp_path, field):
        write_dataset(tmp_path, small_denoise_dataset)
        manifest = read_manifest(tmp_path)
        del manifest[field]
        write_json(tmp_path / MANIFEST, manifest)
        with pytest.raises(DataError, match=field):
            read_dataset(tmp_path)

    def test_manifest_count_not_a_number(self, small_denoise_dataset, tmp_path):
        write_dataset(tmp_path, small_denoise_dataset)
        manifest = read_manifest(tmp_path)
        manifest["count"] = "many"
        write_json(tmp_path / MANIFEST, manifest)
        with pytest.raises(DataError):
            read_dataset(tmp_path)

    def test_missing_patch(self, small_denoise_dataset, tmp_path):
        write_dataset(tmp_path, small_denoise_dataset)
        (tmp_path / TARGETS_DIR / "00003.spd").unlink()
        with pytest.raises(DataError):
            read_dataset(tmp_path)


# ============================================================================
# Checkpoints
# ============================================================================

@pytest.fixture
def checkpoint_file(tiny_model, toy_schedule, tmp_path):
    return save_checkpoint(
        tmp_path / "model.ckpt", tiny_model, toy_schedule, 120, {"seed": 4, "iteration": 120}
    )


class TestCheckpoints:
    def test_save_load_save_is_identical(self, checkpoint_file, tmp_path):
        ckpt = load_checkpoint(checkpoint_file)
        assert ckpt.to_bytes() == checkpoint_file.read_bytes()

    def test_header(self, checkpoint_file, tiny_config):
        ckpt = load_checkpoint(checkpoint_file)
        assert ckpt.iteration == 120
        assert ckpt.rng_state == {"seed": 4, "iteration": 120}
        assert ckpt.architecture == tiny_config
        assert ckpt.header["schedule"] == {"T": 50, "beta_start": 1e-4, "beta_end": 0.02}
        assert ckpt.train_config is None

    def test_parameters_round_trip(self, checkpoint_file, tiny_model):
        model = load_checkpoint(checkpoint_file).build_denoiser()
        expected = tiny_model.named_arrays()
        actual = model.named_arrays()
        assert list(actual) == list(expected)
        assert all(actual[k].tobytes() == expected[k].tobytes() for k in expected)

    def test_schedule_round_trip(self, checkpoint_file, toy_schedule):
        s = load_checkpoint(checkpoint_file).schedule()
        assert s.alpha_bars.tobytes() == toy_schedule.alpha_bars.tobytes()

    @pytest.mark.parametrize("where", ["header", "middle", "end"])
    def test_flipped_bit(self, checkpoint_file, where):
        data = bytearray(checkpoint_file.read_bytes())
        position = {"header": 12, "middle": len(data) // 2, "end": len(data) - 1}[where]
        data[position] ^= 0x10
        with pytest.raises(IntegrityError):
            Checkpoint.from_bytes(bytes(data))

    def test_truncated(self, checkpoint_file):
        with pytest.raises(IntegrityError, match="truncated"):
            Checkpoint.from_bytes(checkpoint_file.read_bytes()[:-7])

    def test_version_mismatch(self, checkpoint_file):
        data = bytearray(checkpoint_file.read_bytes())
        data[4:6] = struct.pack("<H", 7)
        with pytest.raises(FormatVersionError, match="version 7"):
            Checkpoint.from_bytes(bytes(data))

    def test_header_missing_schedule(self, checkpoint_file):
        ckpt = load_checkpoint(checkpoint_file)
        del ckpt.header["schedule"]
        with pytest.raises(DataError, match="schedule"):
            Checkpoint.from_bytes(ckpt.to_bytes())

    def test_refuses_non_finite_parameters(self, tiny_model, toy_schedule, tmp_path):
        with torch.no_grad():
            tiny_model.out_conv.bias.fill_(float("nan"))
        with pytest.raises(DataError):
            save_checkpoint(tmp_path / "nan.ckpt", tiny_model, toy_schedule, 0, {"seed": 0, "iteration": 0})

    def test_restore_rejects_other_architecture(self, checkpoint_file):
        other = build_denoiser(DenoiserConfig(in_channels=2, base_channels=16, depth=1, num_groups=4), 0)
        with pytest.raises(ConfigurationError):
            load_checkpoint(checkpoint_file).restore(other)

    def test_optimizer_state_round_trip(self, tiny_config, small_denoise_dataset, toy_schedule, tmp_path):
        model = build_denoiser(tiny_config, 0)
        optimizer = make_optimizer(model, 1e-3)
        for iteration in (1, 2):
            batch = assemble_batch(small_denoise_dataset, toy_schedule, 0, iteration, 2)
            train_step(model, optimizer, batch, toy_schedule, iteration)
        path = save_checkpoint(
            tmp_path / "opt.ckpt", model, toy_schedule, 2, {"seed": 0, "iteration": 2},
            optimizer=optimizer,
        )
        fresh = build_denoiser(tiny_config, 1)
        fresh_optimizer = make_optimizer(fresh, 1e-3)
        load_checkpoint(path).restore(fresh, fresh_optimizer)
        before, after = optimizer.state_dict()["state"], fresh_optimizer.state_dict()["state"]
        assert sorted(before) == sorted(after)
        for i in before:
            assert float(after[i]["step"]) == 2.0
            assert torch.equal(before[i]["exp_avg"], after[i]["exp_avg"])
            assert torch.equal(before[i]["exp_avg_sq"], after[i]["exp_avg_sq"])
