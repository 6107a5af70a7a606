"""
Binary file formats for patches, gathers, datasets and checkpoints.

All multi-byte integers and floats are little-endian. Every file is written
atomically (temporary file in the destination directory, then rename), so a
reader sees either the previous file or the complete new one.

Patch file (.spd)
    offset  size       field
    0       4          magic b"SPD1"
    4       2          u16 format version (1)
    6       1          u8 ndim
    7       4 * ndim   u32 dims, row-major order
    ...     4 * prod   f32 payload, row-major
    ...     4          u32 CRC-32 of the payload

Checkpoint file (.ckpt)
    0       4          magic b"SDCK"
    4       2          u16 format version (1)
    6       4          u32 header length N
    10      N          header, canonical JSON (sorted keys, no whitespace), UTF-8
    10+N    4          u32 CRC-32 of the header bytes
    14+N    4          u32 block count
    then per block, in ascending name order:
            2          u16 name length n
            n          name, UTF-8
            1          u8 dtype (1 = f32, 2 = f64)
            1          u8 ndim
            4 * ndim   u32 dims
            ...        payload
            4          u32 CRC-32 of everything in the block before it

Block names: "params/<parameter>", "optimizer/exp_avg/<parameter>",
"optimizer/exp_avg_sq/<parameter>" (f32) and "schedule/<sequence>" (f64).
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional

import numpy as np
import torch

from seisdiff.config import DenoiserConfig, Family, Task, TrainConfig
from seisdiff.exceptions import (
    ConfigurationError,
    DataError,
    FormatVersionError,
    IntegrityError,
    ValidationError,
)
from seisdiff.schedule import NoiseSchedule, linear_schedule
from seisdiff.seismic_synth import EventSpec, Gather, PatchDataset
from seisdiff.types import CheckpointHeader, DatasetManifest, GatherSidecar, RngState
from seisdiff.utils import PathLike, atomic_write_bytes, canonical_json, read_json, write_json

if TYPE_CHECKING:
    from seisdiff.denoiser import Denoiser

PATCH_MAGIC = b"SPD1"
PATCH_VERSION = 1
CHECKPOINT_MAGIC = b"SDCK"
CHECKPOINT_VERSION = 1
DATASET_VERSION = 1

_SIDECAR_KEYS = ("dt", "dx")
_MANIFEST_KEYS = ("task", "family", "seed", "count", "scales", "dt", "dx")
_HEADER_KEYS = ("architecture", "schedule", "iteration", "rng_state")

PATCH_SUFFIX = ".spd"
MANIFEST = "manifest.json"
TARGETS_DIR = "targets"
INPUTS_DIR = "inputs"

_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}
_SCHEDULE_ARRAYS = ("betas", "alphas", "alpha_bars", "alpha_bars_prev", "posterior_variances")


class _Reader:
    """Sequential reader that reports the offset of any short read."""

    def __init__(self, data: bytes, path: PathLike) -> None:
        self.data = data
        self.path = str(path)
        self.offset = 0

    def fail(self, message: str, offset: Optional[int] = None) -> IntegrityError:
        at = self.offset if offset is None else offset
        return IntegrityError(
            f"{self.path}: {message} at offset {at}", details={"path": self.path, "offset": at}
        )

    def take(self, n: int, what: str) -> bytes:
        if n < 0 or self.offset + n > len(self.data):
            raise self.fail(f"truncated {what} (need {n} bytes, {len(self.data) - self.offset} left)")
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def crc(self, payload: bytes, what: str) -> None:
        at = self.offset
        (stored,) = self.unpack("<I", f"{what} CRC")
        if stored != zlib.crc32(payload):
            raise self.fail(f"{what} CRC mismatch", at)

    def expect_end(self) -> None:
        if self.offset != len(self.data):
            raise self.fail(f"{len(self.data) - self.offset} unexpected trailing bytes")


def _read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError as e:
        raise DataError(f"{path}: no such file", details={"path": str(path)}) from e
    except OSError as e:
        raise DataError(f"{path}: {e.strerror or e}", details={"path": str(path)}) from e


def _check_finite(array: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(array)):
        raise DataError(f"refusing to write non-finite values to {what}")


# ============================================================================
# Patch files
# ============================================================================

def encode_patch(array: np.ndarray) -> bytes:
    """Serialize an array (any rank 1..255) to the patch-file layout."""
    values = np.ascontiguousarray(array, dtype="<f4")
    payload = values.tobytes(order="C")
    head = PATCH_MAGIC + struct.pack("<HB", PATCH_VERSION, values.ndim)
    head += struct.pack(f"<{values.ndim}I", *values.shape)
    return head + payload + struct.pack("<I", zlib.crc32(payload))


def decode_patch(data: bytes, path: PathLike = "<bytes>") -> np.ndarray:
    """Parse patch-file bytes; raises IntegrityError naming path and offset."""
    reader = _Reader(data, path)
    if reader.take(4, "magic") != PATCH_MAGIC:
        raise reader.fail("bad magic (not a patch file)", 0)
    (version,) = reader.unpack("<H", "version")
    if version != PATCH_VERSION:
        raise FormatVersionError(
            f"{path}: patch format version {version} is not supported (expected {PATCH_VERSION})",
            details={"path": str(path), "offset": 4, "version": version},
        )
    (ndim,) = reader.unpack("<B", "ndim")
    dims = reader.unpack(f"<{ndim}I", "dims")
    count = int(np.prod(dims, dtype=np.int64))
    payload = reader.take(4 * count, "payload")
    reader.crc(payload, "payload")
    reader.expect_end()
    return np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)


def write_patch_file(path: PathLike, array: np.ndarray) -> Path:
    """
    Write an array as float32 to a patch file.

    Raises:
        DataError: Non-finite values
        StorageError: The write failed
    """
    _check_finite(np.asarray(array), str(path))
    return atomic_write_bytes(path, encode_patch(array))


def read_patch_file(path: PathLike) -> np.ndarray:
    """
    Read a patch file.

    Raises:
        IntegrityError: Bad magic, truncation, trailing bytes or CRC mismatch
        FormatVersionError: Unsupported version
    """
    return decode_patch(_read_bytes(path), path)


def patch_files(directory: PathLike) -> list[Path]:
    """Patch files of a directory in name order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory", details={"path": str(directory)})
    return sorted(p for p in directory.iterdir() if p.suffix == PATCH_SUFFIX)


def patch_name(index: int) -> str:
    return f"{index:05d}{PATCH_SUFFIX}"


# ============================================================================
# Gathers
# ============================================================================

def _read_document(path: Path) -> dict[str, Any]:
    try:
        document = read_json(path)
    except (OSError, ValueError) as e:
        raise DataError(f"{path}: unreadable JSON ({e})", details={"path": str(path)}) from e
    if not isinstance(document, dict):
        raise DataError(f"{path}: expected a JSON object", details={"path": str(path)})
    return document


def _require_keys(document: dict[str, Any], keys: tuple[str, ...], source: PathLike) -> None:
    missing = [key for key in keys if key not in document]
    if missing:
        raise DataError(
            f"{source}: missing field(s) {', '.join(missing)}",
            details={"path": str(source), "missing": missing},
        )


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def write_gather(path: PathLike, gather: Gather) -> Path:
    """Write gather data as a patch file plus a JSON sidecar with dt, dx and events."""
    path = Path(path)
    write_patch_file(path, gather.data)
    sidecar: GatherSidecar = {
        "dt": gather.dt,
        "dx": gather.dx,
        "n_events": len(gather.events),
        "events": [asdict(e) for e in gather.events],
    }
    write_json(_sidecar_path(path), sidecar)
    return path


def read_gather(path: PathLike, dt: float = 0.004, dx: float = 12.5) -> Gather:
    """Read a gather; sampling defaults apply when the sidecar is missing."""
    path = Path(path)
    data = read_patch_file(path)
    if data.ndim != 2:
        raise DataError(f"{path}: a gather must be 2-D, got shape {data.shape}")
    events: list[EventSpec] = []
    sidecar_path = _sidecar_path(path)
    if sidecar_path.exists():
        sidecar = _read_document(sidecar_path)
        _require_keys(sidecar, _SIDECAR_KEYS, sidecar_path)
        try:
            dt, dx = float(sidecar["dt"]), float(sidecar["dx"])
            events = [EventSpec(**e) for e in sidecar.get("events", [])]
        except (TypeError, ValueError, ValidationError) as e:
            raise DataError(f"{sidecar_path}: malformed sidecar ({e})") from e
    return Gather(data=data.astype(np.float64), dt=dt, dx=dx, events=events)


# ============================================================================
# Datasets
# ============================================================================

def _family_from_tag(tag: str) -> Family:
    for family in Family:
        if tag in (family.tag, family.value):
            return family
    raise DataError(f"unknown dataset family {tag!r}")


def write_dataset(directory: PathLike, dataset: PatchDataset) -> Path:
    """
    Write manifest.json, targets/NNNNN.spd (H x W) and inputs/NNNNN.spd (k x H x W).

    The output is a pure function of the dataset: rewriting produces identical bytes.
    """
    directory = Path(directory)
    for i in range(len(dataset)):
        write_patch_file(directory / TARGETS_DIR / patch_name(i), dataset.targets[i])
        write_patch_file(directory / INPUTS_DIR / patch_name(i), dataset.conditions[i])
    manifest: DatasetManifest = {
        "format_version": DATASET_VERSION,
        "task": dataset.task.value,  # type: ignore[typeddict-item]
        "family": dataset.family.tag,  # type: ignore[typeddict-item]
        "seed": dataset.seed,
        "count": len(dataset),
        "patch_shape": list(dataset.patch_shape),
        "cond_channels": dataset.task.cond_channels,
        "dt": dataset.dt,
        "dx": dataset.dx,
        "scales": [float(x) for x in dataset.scales],
        "provenance": dataset.provenance,
    }
    write_json(directory / MANIFEST, manifest)
    return directory


def read_manifest(directory: PathLike) -> DatasetManifest:
    path = Path(directory) / MANIFEST
    if not path.exists():
        raise DataError(f"{directory}: missing {MANIFEST}", details={"path": str(path)})
    document = _read_document(path)
    version = document.get("format_version")
    if version != DATASET_VERSION:
        raise FormatVersionError(
            f"{path}: dataset format version {version} is not supported (expected {DATASET_VERSION})"
        )
    _require_keys(document, _MANIFEST_KEYS, path)
    return document  # type: ignore[return-value]


def read_dataset(directory: PathLike) -> PatchDataset:
    """
    Load a dataset written by write_dataset.

    Raises:
        DataError: Missing manifest or patch files, or inconsistent shapes
        IntegrityError: Corrupt patch files
    """
    directory = Path(directory)
    manifest = read_manifest(directory)
    try:
        count = int(manifest["count"])
    except (TypeError, ValueError) as e:
        raise DataError(f"{directory}: manifest count is not an integer ({e})") from e
    targets = [read_patch_file(directory / TARGETS_DIR / patch_name(i)) for i in range(count)]
    inputs = [read_patch_file(directory / INPUTS_DIR / patch_name(i)) for i in range(count)]
    if count == 0:
        raise DataError(f"{directory}: dataset is empty")
    try:
        return PatchDataset(
            task=Task(manifest["task"]),
            family=_family_from_tag(manifest["family"]),
            seed=int(manifest["seed"]),
            targets=np.stack(targets),
            conditions=np.stack(inputs),
            scales=np.asarray(manifest["scales"], dtype=np.float64),
            dt=float(manifest["dt"]),
            dx=float(manifest["dx"]),
            provenance=dict(manifest.get("provenance", {})),
        )
    except (TypeError, ValueError, ValidationError) as e:
        raise DataError(f"{directory}: inconsistent dataset ({e})") from e


# ============================================================================
# Checkpoints
# ============================================================================

def _encode_block(name: str, array: np.ndarray) -> bytes:
    code = _DTYPE_CODES[array.dtype.newbyteorder("<")]
    values = np.ascontiguousarray(array, dtype=_DTYPES[code])
    encoded = name.encode("utf-8")
    body = struct.pack("<H", len(encoded)) + encoded + struct.pack("<BB", code, values.ndim)
    body += struct.pack(f"<{values.ndim}I", *values.shape) + values.tobytes(order="C")
    return body + struct.pack("<I", zlib.crc32(body))


def _decode_block(reader: _Reader) -> tuple[str, np.ndarray]:
    start = reader.offset
    (name_len,) = reader.unpack("<H", "block name length")
    raw = reader.take(name_len, "block name")
    try:
        name = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise reader.fail("unreadable block name", start) from e
    code, ndim = reader.unpack("<BB", f"block '{name}' dtype")
    if code not in _DTYPES:
        raise reader.fail(f"block '{name}' has unknown dtype code {code}")
    dims = reader.unpack(f"<{ndim}I", f"block '{name}' dims")
    dtype = _DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64))
    payload = reader.take(count * dtype.itemsize, f"block '{name}' payload")
    reader.crc(reader.data[start : reader.offset], f"block '{name}'")
    return name, np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


@dataclass
class Checkpoint:
    """
    Parsed checkpoint: JSON header plus named float blocks.

    Serialization is canonical: to_bytes() of a loaded checkpoint reproduces the
    file it was read from byte for byte.
    """

    header: dict[str, Any]
    blocks: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def iteration(self) -> int:
        return int(self.header["iteration"])

    @property
    def rng_state(self) -> RngState:
        return self.header["rng_state"]  # type: ignore[no-any-return]

    @property
    def architecture(self) -> DenoiserConfig:
        try:
            return DenoiserConfig(**self.header["architecture"])
        except ValueError as e:
            raise ConfigurationError(f"checkpoint architecture is invalid: {e}") from e

    @property
    def train_config(self) -> Optional[TrainConfig]:
        raw = self.header.get("train_config")
        return TrainConfig(**raw) if raw is not None else None

    def params(self) -> dict[str, np.ndarray]:
        return {name[len("params/"):]: v for name, v in self.blocks.items() if name.startswith("params/")}

    def schedule(self) -> NoiseSchedule:
        """Rebuild the schedule and check it against the stored 64-bit sequences."""
        meta = self.header["schedule"]
        s = linear_schedule(int(meta["T"]), float(meta["beta_start"]), float(meta["beta_end"]))
        for name in _SCHEDULE_ARRAYS:
            stored = self.blocks.get(f"schedule/{name}")
            if stored is not None and not np.array_equal(stored, getattr(s, name)):
                raise IntegrityError(f"stored schedule sequence '{name}' does not match its metadata")
        return s

    def build_denoiser(self) -> "Denoiser":
        """Instantiate the stored architecture with the stored parameters."""
        from seisdiff.denoiser import Denoiser

        model = Denoiser(self.architecture)
        model.load_arrays(self.params())
        model.eval()
        return model

    def restore(self, model: "Denoiser", optimizer: Optional[torch.optim.Optimizer] = None) -> None:
        """
        Load parameters (and Adam moments) into live objects.

        Raises:
            ConfigurationError: The model's architecture differs from the checkpoint's
        """
        if model.config.model_dump(mode="json") != self.header["architecture"]:
            raise ConfigurationError(
                "checkpoint architecture does not match the model",
                details={"checkpoint": self.header["architecture"]},
            )
        model.load_arrays(self.params())
        if optimizer is None:
            return
        names = [name for name, _ in model.named_parameters()]
        step = int(self.header.get("optimizer_step", 0))
        state: dict[int, dict[str, torch.Tensor]] = {}
        for i, name in enumerate(names):
            exp_avg = self.blocks.get(f"optimizer/exp_avg/{name}")
            exp_avg_sq = self.blocks.get(f"optimizer/exp_avg_sq/{name}")
            if exp_avg is None or exp_avg_sq is None:
                continue
            state[i] = {
                "step": torch.tensor(float(step), dtype=torch.float32),
                "exp_avg": torch.from_numpy(exp_avg.astype(np.float32)),
                "exp_avg_sq": torch.from_numpy(exp_avg_sq.astype(np.float32)),
            }
        current = optimizer.state_dict()
        optimizer.load_state_dict({"state": state, "param_groups": current["param_groups"]})

    def to_bytes(self) -> bytes:
        header = canonical_json(self.header).encode("utf-8")
        out = [
            CHECKPOINT_MAGIC,
            struct.pack("<HI", CHECKPOINT_VERSION, len(header)),
            header,
            struct.pack("<I", zlib.crc32(header)),
            struct.pack("<I", len(self.blocks)),
        ]
        out.extend(_encode_block(name, self.blocks[name]) for name in sorted(self.blocks))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes, path: PathLike = "<bytes>") -> "Checkpoint":
        reader = _Reader(data, path)
        if reader.take(4, "magic") != CHECKPOINT_MAGIC:
            raise reader.fail("bad magic (not a checkpoint)", 0)
        (version,) = reader.unpack("<H", "version")
        if version != CHECKPOINT_VERSION:
            raise FormatVersionError(
                f"{path}: checkpoint format version {version} is not supported "
                f"(this build reads version {CHECKPOINT_VERSION})",
                details={"path": str(path), "offset": 4, "version": version},
            )
        (header_len,) = reader.unpack("<I", "header length")
        header_bytes = reader.take(header_len, "header")
        reader.crc(header_bytes, "header")
        try:
            header = json.loads(header_bytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise reader.fail(f"unreadable header ({e})", 10) from e
        if not isinstance(header, dict):
            raise reader.fail("header is not a JSON object", 10)
        _require_keys(header, _HEADER_KEYS, path)
        (n_blocks,) = reader.unpack("<I", "block count")
        blocks: dict[str, np.ndarray] = {}
        for _ in range(n_blocks):
            at = reader.offset
            name, array = _decode_block(reader)
            if name in blocks:
                raise reader.fail(f"duplicate block '{name}'", at)
            blocks[name] = array
        reader.expect_end()
        return cls(header=header, blocks=blocks)

    @classmethod
    def capture(
        cls,
        model: "Denoiser",
        s: NoiseSchedule,
        iteration: int,
        rng_state: RngState,
        optimizer: Optional[torch.optim.Optimizer] = None,
        train_config: Optional[TrainConfig] = None,
    ) -> "Checkpoint":
        """Snapshot a model (and optionally its Adam state) into a checkpoint."""
        blocks: dict[str, np.ndarray] = {}
        for name, value in model.named_arrays().items():
            blocks[f"params/{name}"] = value.astype("<f4")
        step = 0
        if optimizer is not None:
            state = optimizer.state_dict()["state"]
            names = [name for name, _ in model.named_parameters()]
            for i, name in enumerate(names):
                entry = state.get(i)
                if not entry:
                    continue
                step = int(float(entry["step"]))
                blocks[f"optimizer/exp_avg/{name}"] = entry["exp_avg"].detach().cpu().numpy().astype("<f4")
                blocks[f"optimizer/exp_avg_sq/{name}"] = (
                    entry["exp_avg_sq"].detach().cpu().numpy().astype("<f4")
                )
        for name in _SCHEDULE_ARRAYS:
            blocks[f"schedule/{name}"] = np.asarray(getattr(s, name), dtype="<f8")

        header: CheckpointHeader = {
            "format_version": CHECKPOINT_VERSION,
            "architecture": model.config.model_dump(mode="json"),
            "schedule": s.metadata(),
            "iteration": int(iteration),
            "rng_state": {"seed": int(rng_state["seed"]), "iteration": int(rng_state["iteration"])},
            "optimizer_step": step,
        }
        if train_config is not None:
            header["train_config"] = train_config.model_dump(mode="json")
        return cls(header=dict(header), blocks=blocks)


def write_checkpoint(path: PathLike, checkpoint: Checkpoint) -> Path:
    """Serialize a checkpoint atomically."""
    for name, array in checkpoint.blocks.items():
        _check_finite(array, f"checkpoint block '{name}'")
    return atomic_write_bytes(path, checkpoint.to_bytes())


def save_checkpoint(
    path: PathLike,
    params: "Denoiser",
    schedule: NoiseSchedule,
    iteration: int,
    rng_state: RngState,
    *,
    optimizer: Optional[torch.optim.Optimizer] = None,
    train_config: Optional[TrainConfig] = None,
) -> Path:
    """
    Save model parameters, schedule, training position and optimizer state.

    Raises:
        DataError: Non-finite parameters
        StorageError: The write failed
    """
    checkpoint = Checkpoint.capture(params, schedule, iteration, rng_state, optimizer, train_config)
    return write_checkpoint(path, checkpoint)


def load_checkpoint(path: PathLike) -> Checkpoint:
    """
    Read and verify a checkpoint.

    Raises:
        IntegrityError: Bad magic, truncation or CRC mismatch
        FormatVersionError: The file was written by an unsupported format version
    """
    return Checkpoint.from_bytes(_read_bytes(path), path)
