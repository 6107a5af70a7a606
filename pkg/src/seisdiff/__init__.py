"""
seisdiff

Conditional denoising diffusion for seismic processing: demultiple, random-noise
attenuation and trace interpolation, with synthetic data generation, an FX-Decon
baseline and an SSIM/SNR evaluation harness.

Library Example:
    ```python
    import torch
    from seisdiff import Task, Family, TrainConfig, build_dataset, train, sample

    data = build_dataset(Task.DENOISE, Family.IN_DOMAIN, count=256, seed=0)
    result = train(data, TrainConfig.desk(Task.DENOISE))

    x0, cond = data[0]
    out = sample(result.model, cond, result.schedule, seed=1, snapshot_ts=[100, 0])
    ```

Workflow Example:
    ```python
    from seisdiff import Workbench

    bench = Workbench()
    bench.synth.run("interpolate", "in", 100, seed=0, out="runs/data")
    bench.trainer.run("runs/data", "runs/model", profile="desk")
    ```
"""

from seisdiff.config import DenoiserConfig, Family, SeisDiffSettings, Task, TrainConfig
from seisdiff.exceptions import (
    ConfigurationError,
    DataError,
    FormatVersionError,
    IntegrityError,
    NumericError,
    SeisDiffError,
    ShapeMismatchError,
    StorageError,
    TimestepError,
    ValidationError,
    exit_code_for,
)
from seisdiff.schedule import NoiseSchedule, linear_schedule, posterior_coeffs
from seisdiff.diffusion import (
    ElboTerms,
    elbo_terms,
    gaussian_kl,
    predicted_mean,
    prior_kl,
    q_posterior,
    q_sample,
    simple_loss,
)
from seisdiff.denoiser import (
    Conditioning,
    Denoiser,
    DenoiserParams,
    build_denoiser,
    predict_eps,
    timestep_embedding,
)
from seisdiff.training import TrainResult, gradient_check, train, train_step
from seisdiff.sampling import SampleResult, clamp_known, reverse_step, sample, snapshot_distances
from seisdiff.seismic_synth import (
    EventSpec,
    Gather,
    PatchDataset,
    add_multiples,
    add_noise,
    build_dataset,
    decimate_traces,
    extract_patches,
    ricker,
    synth_gather,
)
from seisdiff.fx_baseline import fx_decon
from seisdiff.metrics import MetricsReport, evaluate, snr, ssim
from seisdiff.dataio import (
    Checkpoint,
    load_checkpoint,
    read_dataset,
    read_gather,
    read_patch_file,
    save_checkpoint,
    write_dataset,
    write_gather,
    write_patch_file,
)
from seisdiff.runtime import get_execution_metadata
from seisdiff.workbench import Workbench

__version__ = "0.1.0"

__all__ = [
    # Configuration
    "Task",
    "Family",
    "SeisDiffSettings",
    "DenoiserConfig",
    "TrainConfig",
    # Exceptions
    "SeisDiffError",
    "ConfigurationError",
    "ValidationError",
    "ShapeMismatchError",
    "TimestepError",
    "DataError",
    "IntegrityError",
    "FormatVersionError",
    "StorageError",
    "NumericError",
    "exit_code_for",
    # Diffusion
    "NoiseSchedule",
    "linear_schedule",
    "posterior_coeffs",
    "q_sample",
    "q_posterior",
    "predicted_mean",
    "simple_loss",
    "gaussian_kl",
    "prior_kl",
    "elbo_terms",
    "ElboTerms",
    # Model
    "Conditioning",
    "Denoiser",
    "DenoiserParams",
    "build_denoiser",
    "predict_eps",
    "timestep_embedding",
    "train",
    "train_step",
    "gradient_check",
    "TrainResult",
    "sample",
    "reverse_step",
    "clamp_known",
    "snapshot_distances",
    "SampleResult",
    # Data
    "EventSpec",
    "Gather",
    "PatchDataset",
    "ricker",
    "synth_gather",
    "add_multiples",
    "add_noise",
    "decimate_traces",
    "extract_patches",
    "build_dataset",
    "fx_decon",
    "snr",
    "ssim",
    "evaluate",
    "MetricsReport",
    "write_patch_file",
    "read_patch_file",
    "write_gather",
    "read_gather",
    "write_dataset",
    "read_dataset",
    "save_checkpoint",
    "load_checkpoint",
    "Checkpoint",
    # Workflows
    "Workbench",
    "get_execution_metadata",
    # Version
    "__version__",
]
