"""
FX-Decon: f-x domain Wiener prediction filtering for random-noise attenuation.

Each time window is transformed along time; at every frequency the complex
values across traces form a spatial series that is predictable for linear
events. A short least-squares prediction filter, solved forward and backward
along the traces, keeps the predictable (coherent) part and drops the rest.
Windows are recombined by overlap-add with a sin^2 taper normalized by the
summed taper weights.
"""

from __future__ import annotations

import logging
from typing import Any

import numpy as np
from scipy import fft as sp_fft

from seisdiff.exceptions import ValidationError
from seisdiff.seismic_synth import Gather

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_LEN = 64
DEFAULT_OVERLAP = 0.5
DEFAULT_FILTER_LEN = 4
DEFAULT_PREWHITENING = 0.001


def taper(window_len: int) -> np.ndarray:
    """sin^2(pi (n + 0.5) / N); strictly positive on every sample."""
    n = np.arange(window_len, dtype=np.float64)
    return np.sin(np.pi * (n + 0.5) / window_len) ** 2


def window_starts(n_samples: int, window_len: int, overlap: float) -> list[int]:
    """Start indices of overlapping windows; the last window ends on the last sample."""
    hop = max(1, int(round(window_len * (1.0 - overlap))))
    starts = list(range(0, n_samples - window_len + 1, hop))
    if starts[-1] != n_samples - window_len:
        starts.append(n_samples - window_len)
    return starts


def _lagged(series: np.ndarray, rows: np.ndarray, lags: np.ndarray) -> np.ndarray:
    # series (F, W) -> (F, len(rows), len(lags)) with element [f, m, k] = series[f, rows[m] + lags[k]]
    return series[:, rows[:, None] + lags[None, :]]


def _solve(design: np.ndarray, target: np.ndarray, prewhitening: float) -> np.ndarray:
    gram = np.einsum("fmi,fmj->fij", design.conj(), design)
    rhs = np.einsum("fmi,fm->fi", design.conj(), target)
    scale = prewhitening * np.real(np.trace(gram, axis1=1, axis2=2))
    degenerate = scale <= 0
    p = gram.shape[-1]
    eye = np.eye(p, dtype=gram.dtype)
    gram = gram + scale[:, None, None] * eye
    # All-zero bins have nothing to predict; solve an identity system with zero rhs.
    gram[degenerate] = eye
    rhs[degenerate] = 0
    return np.linalg.solve(gram, rhs[..., None])[..., 0]


def prediction_filters(
    spectrum: np.ndarray, filter_len: int, prewhitening: float
) -> tuple[np.ndarray, np.ndarray]:
    """
    Solve forward and backward one-step prediction filters for every frequency bin.

    Forward:  s[j] ~ sum_k a[k] s[j - 1 - k]  for j >= filter_len
    Backward: s[j] ~ sum_k b[k] s[j + 1 + k]  for j <= W - 1 - filter_len

    The normal equations are damped by prewhitening * trace(R) on the diagonal.

    Args:
        spectrum: (F, W) complex values across W traces for F bins

    Returns:
        (forward, backward), each (F, filter_len) complex
    """
    width = spectrum.shape[-1]
    lags = np.arange(1, filter_len + 1)
    fwd_rows = np.arange(filter_len, width)
    bwd_rows = np.arange(0, width - filter_len)
    forward = _solve(_lagged(spectrum, fwd_rows, -lags), spectrum[:, fwd_rows], prewhitening)
    backward = _solve(_lagged(spectrum, bwd_rows, lags), spectrum[:, bwd_rows], prewhitening)
    return forward, backward


def predict_spatial(spectrum: np.ndarray, filter_len: int, prewhitening: float) -> np.ndarray:
    """
    Replace each bin's spatial series by its forward/backward prediction.

    Interior traces average both predictions; the first and last filter_len
    traces only have one side available and use it alone.
    """
    width = spectrum.shape[-1]
    forward, backward = prediction_filters(spectrum, filter_len, prewhitening)
    lags = np.arange(1, filter_len + 1)
    fwd_rows = np.arange(filter_len, width)
    bwd_rows = np.arange(0, width - filter_len)

    total = np.zeros_like(spectrum)
    count = np.zeros(width)
    total[:, fwd_rows] += np.einsum("fmk,fk->fm", _lagged(spectrum, fwd_rows, -lags), forward)
    count[fwd_rows] += 1
    total[:, bwd_rows] += np.einsum("fmk,fk->fm", _lagged(spectrum, bwd_rows, lags), backward)
    count[bwd_rows] += 1
    return total / count


def validate_params(
    n_samples: int,
    n_traces: int,
    window_len: int,
    overlap: float,
    filter_len: int,
    prewhitening: float,
) -> None:
    if not 1 <= window_len <= n_samples:
        raise ValidationError(f"window_len must lie in [1, {n_samples}], got {window_len}")
    if not 0 <= overlap < 1:
        raise ValidationError(f"overlap must lie in [0, 1), got {overlap}")
    if not (filter_len >= 1 and filter_len < n_traces / 2):
        raise ValidationError(
            f"filter_len must satisfy 1 <= filter_len < n_traces/2 ({n_traces / 2}), got {filter_len}"
        )
    if not 0 < prewhitening < 1:
        raise ValidationError(f"prewhitening must lie in (0, 1), got {prewhitening}")


def fx_decon(
    g: Gather,
    window_len: int = DEFAULT_WINDOW_LEN,
    overlap: float = DEFAULT_OVERLAP,
    filter_len: int = DEFAULT_FILTER_LEN,
    prewhitening: float = DEFAULT_PREWHITENING,
    predict: bool = True,
) -> Gather:
    """
    Attenuate incoherent noise in a gather by f-x prediction filtering.

    Args:
        g: Input gather (n_samples x n_traces)
        window_len: Time-window length in samples
        overlap: Fractional overlap of consecutive windows
        filter_len: Prediction filter taps
        prewhitening: Diagonal damping as a fraction of trace(R)
        predict: False skips the filtering and only runs the window
            decomposition and overlap-add (identity path)

    Returns:
        Filtered gather with the input's shape and sampling

    Raises:
        ValidationError: Parameters outside their ranges
    """
    data = np.asarray(g.data, dtype=np.float64)
    n_samples, n_traces = data.shape
    validate_params(n_samples, n_traces, window_len, overlap, filter_len, prewhitening)

    weights = taper(window_len)
    out = np.zeros_like(data)
    norm = np.zeros(n_samples)
    for start in window_starts(n_samples, window_len, overlap):
        segment = data[start : start + window_len]
        if predict and np.any(segment):
            spectrum = sp_fft.rfft(segment, axis=0)
            filtered = sp_fft.irfft(
                predict_spatial(spectrum, filter_len, prewhitening), n=window_len, axis=0
            )
        else:
            if predict:
                logger.debug("window at sample %d is all zero; passed through", start)
            filtered = segment
        out[start : start + window_len] += weights[:, None] * filtered
        norm[start : start + window_len] += weights
    return Gather(data=out / norm[:, None], dt=g.dt, dx=g.dx, events=list(g.events))


def fx_decon_patch(patch: np.ndarray, dt: float = 0.004, dx: float = 12.5, **params: Any) -> np.ndarray:
    """fx_decon on a bare (H, W) array, returning an array of the input dtype."""
    gather = Gather(data=np.asarray(patch, dtype=np.float64), dt=dt, dx=dx)
    return fx_decon(gather, **params).data.astype(np.asarray(patch).dtype, copy=False)  # type: ignore[arg-type]
