"""Conversion of raw 1D XRD patterns into binary peak representations.

Three steps: sliding-window polynomial smoothing to kill intensity spikes,
iterated-clipping baseline subtraction to remove slowly varying background,
and windowed threshold peak detection on the first-order difference.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import (
    BinaryPeakPattern,
    ContractViolation,
    DatasetError,
    ParameterError,
    XrdSample,
)

__all__ = [
    "BinarizationParams",
    "smooth",
    "fit_baseline",
    "subtract_and_clamp",
    "detect_peaks",
    "preprocess",
    "binarize_sample",
    "binarize_dataset",
    "estimate_intensity_threshold",
    "window_bounds",
    "window_of_index",
]

BASELINE_MAX_ITER = 10


@dataclass(frozen=True)
class BinarizationParams:
    """Parameters of the pattern-to-bits conversion.

    `window_count` is the width W of the resulting bit vector; it must not
    exceed the grid length.  `intensity_threshold` is in processed counts.
    """

    window_count: int
    intensity_threshold: float
    smooth_degree: int = 5
    smooth_window: int = 21
    baseline_degree: int = 1

    def __post_init__(self) -> None:
        if self.window_count < 1:
            raise ParameterError("window_count must be >= 1")
        if self.intensity_threshold < 0:
            raise ParameterError("intensity_threshold must be >= 0")
        if self.smooth_degree < 0 or self.baseline_degree < 0:
            raise ParameterError("polynomial degrees must be >= 0")
        if self.smooth_window % 2 == 0:
            raise ParameterError("smooth_window must be odd")
        if self.smooth_window <= self.smooth_degree:
            raise ParameterError("smooth_window must exceed smooth_degree")


def _fit_row(offsets: np.ndarray, degree: int) -> np.ndarray:
    """Coefficient vector c with c @ y = value at offset 0 of the LS polynomial fit."""
    v = np.vander(offsets.astype(float), degree + 1, increasing=True)
    return np.linalg.pinv(v)[0]


@lru_cache(maxsize=32)
def _smoothing_rows(degree: int, window: int) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    half = window // 2
    center = _fit_row(np.arange(-half, half + 1), degree)
    left, right = [], []
    for i in range(half):
        # truncated one-sided windows at the series edges
        n_pts = i + half + 1
        eff = min(degree, n_pts - 1)
        left.append(_fit_row(np.arange(n_pts) - i, eff))
        right.append(_fit_row(np.arange(n_pts) - (n_pts - 1 - i), eff))
    return center, left, right


def smooth(intensities: Sequence[float], degree: int, window: int) -> np.ndarray:
    """Sliding least-squares polynomial smoothing.

    Each output point is the value at the center of a degree-`degree`
    least-squares fit over the surrounding `window` points; the first and
    last `window // 2` points are fit over their truncated one-sided windows.
    """
    y = np.asarray(intensities, dtype=float)
    if y.ndim != 1:
        raise ParameterError("intensities must be 1D")
    if not np.all(np.isfinite(y)):
        raise ParameterError("intensities must be finite")
    n = y.size
    if window % 2 == 0:
        raise ParameterError("window must be odd")
    if window <= degree:
        raise ParameterError("window must exceed degree")
    if window > n:
        raise ParameterError(f"window {window} exceeds series length {n}")

    center, left, right = _smoothing_rows(degree, window)
    half = window // 2
    out = np.empty(n)
    out[half : n - half] = sliding_window_view(y, window) @ center
    for i in range(half):
        out[i] = left[i] @ y[: i + half + 1]
        out[n - 1 - i] = right[i] @ y[n - (i + half + 1) :]
    return out


def fit_baseline(smoothed: Sequence[float], degree: int) -> tuple[np.ndarray, bool]:
    """Background estimate by iterated clipping.

    Fits a least-squares polynomial over all points, refits using only the
    points at or below the fit, and repeats until the retained set is stable
    (at most 10 iterations).  Returns (baseline, fallback); fallback is True
    when clipping degenerated and a plain fit over all points was used.
    """
    y = np.asarray(smoothed, dtype=float)
    n = y.size
    if degree >= n:
        raise ParameterError(f"baseline degree {degree} must be < length {n}")
    x = np.arange(n, dtype=float)

    def fit_eval(mask: np.ndarray) -> np.ndarray:
        series = np.polynomial.Polynomial.fit(x[mask], y[mask], degree)
        return series(x)

    # points sitting exactly on their fit must stay retained despite evaluation
    # rounding, or an exact polynomial background never reaches the stable exit
    tol = 1e-9 * max(1.0, float(np.abs(y).max()))
    retained = np.ones(n, dtype=bool)
    fitted = fit_eval(retained)
    for _ in range(BASELINE_MAX_ITER - 1):
        new_retained = y <= fitted + tol
        if new_retained.sum() < degree + 1:
            return fit_eval(np.ones(n, dtype=bool)), True
        if np.array_equal(new_retained, retained):
            break
        retained = new_retained
        fitted = fit_eval(retained)
    return fitted, False


def subtract_and_clamp(smoothed: Sequence[float], baseline: Sequence[float]) -> np.ndarray:
    """Elementwise max(smoothed - baseline, 0)."""
    a = np.asarray(smoothed, dtype=float)
    b = np.asarray(baseline, dtype=float)
    if a.shape != b.shape:
        raise ParameterError(f"length mismatch: {a.shape} vs {b.shape}")
    return np.maximum(a - b, 0.0)


def window_bounds(length: int, window_count: int) -> np.ndarray:
    """Start offsets of `window_count` near-equal contiguous windows (plus end sentinel).

    The first `length % window_count` windows get one extra point.
    """
    if window_count < 1 or window_count > length:
        raise ParameterError(f"window_count {window_count} not in [1, {length}]")
    base, extra = divmod(length, window_count)
    sizes = np.full(window_count, base, dtype=np.intp)
    sizes[:extra] += 1
    bounds = np.zeros(window_count + 1, dtype=np.intp)
    np.cumsum(sizes, out=bounds[1:])
    return bounds


def window_of_index(index: int | np.ndarray, length: int, window_count: int) -> np.ndarray:
    """Window number containing each grid index."""
    bounds = window_bounds(length, window_count)
    return np.searchsorted(bounds, index, side="right") - 1


def _local_maxima(y: np.ndarray) -> np.ndarray:
    """Indices where the first difference changes sign + to -; plateaus take the leftmost index."""
    d = np.diff(y)
    steps = np.flatnonzero(d)
    if steps.size < 2:
        return np.empty(0, dtype=np.intp)
    signs = np.sign(d[steps])
    rise_then_fall = np.flatnonzero((signs[:-1] > 0) & (signs[1:] < 0))
    return steps[rise_then_fall] + 1


def detect_peaks(processed: Sequence[float], params: BinarizationParams) -> BinaryPeakPattern:
    """Windowed threshold peak detection on a processed pattern.

    Local maxima are the candidates; within each of the W windows only the
    candidate with the highest intensity is considered, and the window's bit
    is set iff that intensity reaches the threshold.
    """
    y = np.asarray(processed, dtype=float)
    w = params.window_count
    if w > y.size:
        raise ParameterError(f"window_count {w} exceeds series length {y.size}")
    cands = _local_maxima(y)
    if cands.size == 0:
        return BinaryPeakPattern(w, ())
    windows = window_of_index(cands, y.size, w)
    peaks = []
    for win in np.unique(windows):
        in_win = cands[windows == win]
        best = in_win[np.argmax(y[in_win])]
        if y[best] >= params.intensity_threshold:
            peaks.append(int(win))
    return BinaryPeakPattern(w, tuple(peaks))


def preprocess(intensities: Sequence[float], params: BinarizationParams) -> np.ndarray:
    """smooth -> fit_baseline -> subtract_and_clamp."""
    smoothed = smooth(intensities, params.smooth_degree, params.smooth_window)
    baseline, _ = fit_baseline(smoothed, params.baseline_degree)
    return subtract_and_clamp(smoothed, baseline)


def binarize_sample(sample: XrdSample, params: BinarizationParams) -> BinaryPeakPattern:
    """Full pattern-to-bits conversion for one sample; pure in (sample, params)."""
    return detect_peaks(preprocess(sample.intensities, params), params)


def binarize_dataset(samples: Sequence[XrdSample], params: BinarizationParams) -> list[BinaryPeakPattern]:
    """Order-preserving binarization of a whole dataset sharing one grid."""
    lengths = {s.intensities.size for s in samples}
    if len(lengths) > 1:
        raise DatasetError(f"samples disagree on grid length: {sorted(lengths)}")
    return [binarize_sample(s, params) for s in samples]


def estimate_intensity_threshold(processed: Sequence[np.ndarray] | np.ndarray) -> float:
    """Robust data-driven threshold: median + 5 * MAD over all processed values."""
    if isinstance(processed, np.ndarray):
        pooled = processed.ravel()
    else:
        pooled = np.concatenate([np.ravel(p) for p in processed])
    if pooled.size == 0:
        raise ParameterError("cannot estimate a threshold from no data")
    med = float(np.median(pooled))
    mad = float(np.median(np.abs(pooled - med)))
    return med + 5.0 * mad
