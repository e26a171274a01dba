"""FFT (radix-2 with Bluestein fallback), spectra and the short-time Fourier transform."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    magnitudes: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=np.float64)
        m = np.asarray(self.magnitudes, dtype=np.float64)
        if f.shape != m.shape or f.ndim != 1:
            raise ValidationError("freqs and magnitudes must be 1-D of equal length", "freqs")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise ValidationError("freqs must be strictly increasing", "freqs")
        if np.any(m < 0):
            raise ValidationError("magnitudes must be non-negative", "magnitudes")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "magnitudes", m)

    def peak(self):
        return float(self.freqs[int(np.argmax(self.magnitudes))])


def _is_pow2(n):
    return n > 0 and n & (n - 1) == 0


def _radix2(x):
    """Iterative Cooley-Tukey on the last axis; length must be a power of two."""
    n = x.shape[-1]
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    a = x[..., rev].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        a = a.reshape(*x.shape[:-1], n // size, size)
        even = a[..., :half]
        odd = a[..., half:] * tw
        a = np.concatenate([even + odd, even - odd], axis=-1)
        size *= 2
    return a.reshape(x.shape)


def _bluestein(x):
    n = x.shape[-1]
    m = 1 << (2 * n - 1).bit_length()
    k = np.arange(n)
    # k^2 mod 2n keeps the chirp argument small for long inputs
    chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)
    a = np.zeros((*x.shape[:-1], m), dtype=np.complex128)
    a[..., :n] = x * chirp
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[m - n + 1:] = np.conj(chirp[1:][::-1])
    conv = _ifft_pow2(_radix2(a) * _radix2(b))
    return conv[..., :n] * chirp


def _ifft_pow2(x):
    return np.conj(_radix2(np.conj(x))) / x.shape[-1]


def fft(x):
    """Forward DFT along the last axis: X[k] = sum_n x[n] exp(-2j pi k n / N)."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if n < 1:
        raise ValidationError("fft needs at least one sample", "x")
    if n == 1:
        return x.copy()
    return _radix2(x) if _is_pow2(n) else _bluestein(x)


def ifft(X):
    X = np.asarray(X, dtype=np.complex128)
    return np.conj(fft(np.conj(X))) / X.shape[-1]


def fftfreq(n, dt=1.0):
    k = np.arange(n)
    k = np.where(k < (n + 1) // 2, k, k - n)
    return k / (n * dt)


def spectrum(values, dt=1.0):
    """Magnitude spectrum with frequencies in increasing order."""
    values = np.asarray(values)
    X = fft(values)
    f = fftfreq(values.size, dt)
    order = np.argsort(f, kind="stable")
    return Spectrum(f[order], np.abs(X)[order])


def window_coeffs(kind, n):
    if kind == "rect":
        return np.ones(n)
    if kind == "hann":
        # periodic Hann; n == 1 degenerates to a single unit tap
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n) if n > 1 else np.ones(1)
    raise ValidationError(f"unknown window {kind!r}", "window")


def stft(values, window_len, hop, window="hann"):
    """Magnitudes of windowed FFT frames, shape (n_frames, window_len).

    Frame f covers samples [f*hop, f*hop + window_len); trailing samples that do
    not fill a frame are dropped.
    """
    x = np.asarray(getattr(values, "values", values), dtype=np.complex128).reshape(-1)
    n = x.size
    if not 1 <= hop <= window_len <= n:
        raise ValidationError(f"need 1 <= hop <= window_len <= len ({hop}, {window_len}, {n})", "window_len")
    w = window_coeffs(window, window_len)
    frames = np.lib.stride_tricks.sliding_window_view(x, window_len)[::hop]
    return np.abs(fft(frames * w))
