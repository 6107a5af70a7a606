"""
Runtime Detection and Context

Configures the compute runtime (torch threads) from settings and collects the
execution metadata recorded in every run.json.
"""

import os
import platform
import sys
from typing import Any, Optional

import numpy as np
import torch

from seisdiff.config import SeisDiffSettings

_THREAD_ENV = "SEISDIFF_NUM_THREADS"


def configure_threads(settings: Optional[SeisDiffSettings] = None) -> int:
    """
    Apply the configured intra-op thread count to torch.

    Args:
        settings: Settings to read num_threads from (defaults to a fresh load)

    Returns:
        int: The thread count torch will use
    """
    settings = settings or SeisDiffSettings()
    if settings.num_threads is not None:
        torch.set_num_threads(settings.num_threads)
    return torch.get_num_threads()


def get_execution_metadata() -> dict[str, Any]:
    """
    Get execution metadata for the current runtime.

    Returns:
        dict: Interpreter, library versions and thread configuration

    Example:
        ```python
        metadata = get_execution_metadata()
        print(f"torch {metadata['torch']} on {metadata['threads']} threads")
        ```
    """
    from seisdiff import __version__

    return {
        "seisdiff": __version__,
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "torch": torch.__version__,
        "threads": torch.get_num_threads(),
        "thread_env": os.getenv(_THREAD_ENV),
    }
