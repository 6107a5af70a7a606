"""Pytest configuration and shared fixtures."""

import os

import numpy as np
import pytest
import torch
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Keep .env out of SeisDiffSettings while tests run
os.environ["SEISDIFF_TEST_MODE"] = "true"


# ============================================================================
# Environment Configuration
# ============================================================================

@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch):
    """
    Pin process settings for every test.

    Test mode disables .env loading in SeisDiffSettings; the thread and logging
    variables are cleared so results never depend on the developer's shell.
    """
    monkeypatch.setenv("SEISDIFF_TEST_MODE", "true")
    monkeypatch.delenv("SEISDIFF_NUM_THREADS", raising=False)
    monkeypatch.delenv("SEISDIFF_LOG_EVERY", raising=False)


@pytest.fixture(scope="session", autouse=True)
def fixed_threads():
    """Single-threaded torch so floating point reductions are reproducible."""
    previous = torch.get_num_threads()
    torch.set_num_threads(1)
    yield
    torch.set_num_threads(previous)


# ============================================================================
# Model Fixtures
# ============================================================================

@pytest.fixture
def tiny_config():
    """Depth-1 denoiser for 8x8 patches with one conditioning channel."""
    from seisdiff.config import DenoiserConfig

    return DenoiserConfig(
        in_channels=2,
        base_channels=8,
        depth=1,
        res_blocks_per_level=1,
        time_embed_dim=16,
        num_groups=4,
    )


@pytest.fixture
def tiny_model(tiny_config):
    from seisdiff.denoiser import build_denoiser

    return build_denoiser(tiny_config, seed=0)


@pytest.fixture
def toy_schedule():
    from seisdiff.schedule import linear_schedule

    return linear_schedule(50)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ============================================================================
# Data Fixtures
# ============================================================================

@pytest.fixture(scope="session")
def small_denoise_dataset():
    """Sixteen 16x16 denoise patches from the in-domain family."""
    from seisdiff.config import Family, Task
    from seisdiff.seismic_synth import build_dataset

    return build_dataset(Task.DENOISE, Family.IN_DOMAIN, 16, seed=3, patch_shape=(16, 16))


@pytest.fixture(scope="session")
def small_interpolate_dataset():
    from seisdiff.config import Family, Task
    from seisdiff.seismic_synth import build_dataset

    return build_dataset(Task.INTERPOLATE, Family.IN_DOMAIN, 8, seed=5, patch_shape=(16, 16))


class OracleEps:
    """Noise predictor that returns the true noise used to build x_t from a known x0."""

    def __init__(self, x0, schedule):
        self.x0 = x0
        self.schedule = schedule

    def predict_eps(self, x_t, cond, t):
        ab = float(self.schedule.alpha_bars[int(t) - 1])
        return (x_t - ab**0.5 * self.x0) / (1.0 - ab) ** 0.5


@pytest.fixture
def oracle_eps():
    return OracleEps


# ============================================================================
# Skip Slow Tests if Not Enabled
# ============================================================================

def pytest_configure(config):
    """Register custom markers."""
    config.addinivalue_line(
        "markers", "slow: end-to-end acceptance runs (enable with SEISDIFF_RUN_SLOW=true)"
    )


def pytest_collection_modifyitems(config, items):
    """Skip slow tests unless SEISDIFF_RUN_SLOW is set."""
    if os.getenv("SEISDIFF_RUN_SLOW", "").lower() not in ("1", "true", "yes"):
        skip_slow = pytest.mark.skip(
            reason="Slow acceptance runs disabled. Set SEISDIFF_RUN_SLOW=true to enable."
        )
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip_slow)
