"""Smoothing, outlier removal, low-pass and wavelet denoising of 1-D traces.

Windowed filters are centered and clip the window at the boundaries instead of
padding, so edge outputs use fewer neighbours.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..transforms import spectral, wavelet

HAMPEL_SCALE = 1.4826


@dataclass(frozen=True)
class Series:
    values: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size < 1 or not np.all(np.isfinite(v)):
            raise ValidationError("series must be non-empty and finite", "values")
        if not self.dt > 0:
            raise ValidationError("dt must be > 0", "dt")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def with_values(self, values):
        return Series(values, self.dt)


def _as_series(s):
    return s if isinstance(s, Series) else Series(s)


def _check_window(w, n, minimum=1):
    if int(w) != w or w % 2 == 0 or w < minimum or w > n:
        raise ValidationError(f"window must be odd with {minimum} <= w <= {n}, got {w}", "w")
    return int(w)


def _windows(x, w):
    """(n, w) view of centered windows; positions outside the series are NaN."""
    h = w // 2
    padded = np.concatenate([np.full(h, np.nan), x, np.full(h, np.nan)])
    return np.lib.stride_tricks.sliding_window_view(padded, w)


def moving_average(s, w):
    s = _as_series(s)
    w = _check_window(w, len(s))
    return s.with_values(np.nanmean(_windows(s.values, w), axis=1))


def weighted_ma(s, weights):
    """Centered weighted average; weights falling off the edge are dropped and the rest renormalized."""
    s = _as_series(s)
    wts = np.asarray(weights, dtype=np.float64).reshape(-1)
    if abs(wts.sum() - 1.0) > 1e-12:
        raise ValidationError(f"weights must sum to 1 (got {wts.sum():.15g})", "weights")
    w = _check_window(wts.size, len(s))
    win = _windows(s.values, w)
    valid = ~np.isnan(win)
    num = np.where(valid, win, 0.0) @ wts
    den = valid @ wts
    return s.with_values(num / den)


def ewma(s, alpha):
    s = _as_series(s)
    if not 0 < alpha <= 1:
        raise ValidationError("alpha must lie in (0, 1]", "alpha")
    x = s.values
    y = np.empty_like(x)
    y[0] = x[0]
    for k in range(1, x.size):
        y[k] = alpha * x[k] + (1 - alpha) * y[k - 1]
    return s.with_values(y)


def median_filter(s, w):
    s = _as_series(s)
    w = _check_window(w, len(s))
    return s.with_values(np.nanmedian(_windows(s.values, w), axis=1))


def hampel(s, w=5, n_sigma=3.0):
    """Replace points deviating from the window median by more than n_sigma * 1.4826 * MAD.

    Returns (filtered series, boolean mask of replaced points). A window with
    MAD = 0 has threshold 0, so any deviation from its median is flagged.
    """
    s = _as_series(s)
    w = _check_window(w, len(s), minimum=3)
    if not n_sigma > 0:
        raise ValidationError("n_sigma must be > 0", "n_sigma")
    win = _windows(s.values, w)
    med = np.nanmedian(win, axis=1)
    mad = np.nanmedian(np.abs(win - med[:, None]), axis=1)
    mask = np.abs(s.values - med) > n_sigma * HAMPEL_SCALE * mad
    return s.with_values(np.where(mask, med, s.values)), mask


def lof_scores(points, k=10):
    """Local Outlier Factor with Euclidean distances.

    Neighbourhoods are the k nearest other points (ties at the k-distance broken
    by index order). A point whose neighbours are all at distance zero has
    infinite local density; such densities are capped at the largest finite
    density in the set (or 1 if none is finite), which gives duplicate clusters
    a score of 1.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if not 2 <= k < n:
        raise ValidationError(f"LOF needs 2 <= k < n (k={k}, n={n})", "k")
    d = np.sqrt(np.maximum(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1), 0.0))
    np.fill_diagonal(d, np.inf)
    nn = np.argsort(d, axis=1, kind="stable")[:, :k]
    kdist = d[np.arange(n)[:, None], nn][:, -1]
    reach = np.maximum(d[np.arange(n)[:, None], nn], kdist[nn])
    mean_reach = reach.mean(axis=1)
    with np.errstate(divide="ignore"):
        lrd = np.where(mean_reach > 0, 1.0 / mean_reach, np.inf)
    finite = lrd[np.isfinite(lrd)]
    cap = finite.max() if finite.size else 1.0
    lrd = np.minimum(lrd, cap)
    return lrd[nn].mean(axis=1) / lrd


def lowpass(s, cutoff_hz):
    """FFT brick-wall low-pass: bins with |f| > cutoff are zeroed."""
    s = _as_series(s)
    nyq = 1.0 / (2.0 * s.dt)
    if not 0 < cutoff_hz < nyq:
        raise ValidationError(f"cutoff must lie in (0, {nyq}) Hz", "cutoff_hz")
    n = len(s)
    spec = spectral.fft(s.values.astype(np.complex128))
    freqs = spectral.fftfreq(n, s.dt)
    spec[np.abs(freqs) > cutoff_hz] = 0
    return s.with_values(spectral.ifft(spec).real)


def soft_threshold(c, lam):
    return np.sign(c) * np.maximum(np.abs(c) - lam, 0.0)


def universal_threshold(finest_detail, n):
    """sigma_hat * sqrt(2 ln n), sigma_hat = MAD(finest details) / 0.6745."""
    sigma = np.median(np.abs(finest_detail)) / 0.6745
    return sigma * np.sqrt(2.0 * np.log(n))


def dwt_denoise(s, wavelet_name="db4", levels=3, threshold="universal"):
    """Soft-threshold every detail band of a multi-level DWT and reconstruct.

    ``threshold`` is ``"universal"`` or a fixed non-negative number (0 gives
    perfect reconstruction).
    """
    s = _as_series(s)
    if len(s) < 2**levels:
        raise ValidationError(f"series of length {len(s)} too short for {levels} levels", "levels")
    coeffs = wavelet.dwt(s.values, wavelet_name, levels)
    if threshold == "universal":
        lam = universal_threshold(coeffs.details[0], len(s))
    else:
        lam = float(threshold)
        if lam < 0:
            raise ValidationError("threshold must be >= 0", "threshold")
    if lam > 0:
        coeffs = coeffs.map_details(lambda d: soft_threshold(d, lam))
    return s.with_values(wavelet.idwt(coeffs))
