"""Periodized orthogonal discrete wavelet transform (haar, db4).

Each level filters with the low-pass ``h`` and the quadrature mirror high-pass
``g[n] = (-1)^n h[L-1-n]`` and keeps every second output, wrapping indices
periodically. An odd-length level is first extended by repeating its last
sample; the inverse drops that sample again.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

LOWPASS = {
    "haar": np.array([1.0, 1.0]) / np.sqrt(2.0),
    "db4": np.array([
        0.2303778133088964, 0.7148465705529154, 0.6308807679298587, -0.02798376941685985,
        -0.18703481171909309, 0.030841381835560764, 0.0328830116668852, -0.010597401785069032,
    ]),
}


def filters(name):
    if name not in LOWPASS:
        raise ValidationError(f"unknown wavelet {name!r}; choose from {sorted(LOWPASS)}", "wavelet")
    h = LOWPASS[name]
    g = h[::-1] * (-1.0) ** np.arange(h.size)
    return h, g


@dataclass(frozen=True)
class WaveletCoeffs:
    """Approximation at the coarsest level plus details ordered finest first."""

    approx: np.ndarray
    details: tuple
    wavelet: str
    lengths: tuple  # input length at each level, finest first

    @property
    def levels(self):
        return len(self.details)

    def map_details(self, fn):
        return WaveletCoeffs(self.approx, tuple(fn(d) for d in self.details), self.wavelet, self.lengths)

    def flat(self):
        return np.concatenate([self.approx, *self.details[::-1]])


def _taps(n, L):
    return (2 * np.arange(n // 2)[:, None] + np.arange(L)[None, :]) % n


def dwt_level(x, wavelet="db4"):
    x = np.asarray(x, dtype=np.float64)
    if x.size % 2:
        x = np.append(x, x[-1])
    h, g = filters(wavelet)
    seg = x[_taps(x.size, h.size)]
    return seg @ h, seg @ g


def idwt_level(approx, detail, wavelet="db4", length=None):
    h, g = filters(wavelet)
    n = 2 * approx.size
    out = np.zeros(n)
    np.add.at(out, _taps(n, h.size), approx[:, None] * h + detail[:, None] * g)
    return out[:length] if length is not None else out


def dwt(values, wavelet="db4", levels=1):
    x = np.asarray(getattr(values, "values", values), dtype=np.float64).reshape(-1)
    if levels < 1:
        raise ValidationError("levels must be >= 1", "levels")
    if x.size < 2**levels:
        raise ValidationError(f"length {x.size} too short for {levels} levels", "levels")
    details, lengths = [], []
    a = x
    for _ in range(levels):
        lengths.append(a.size)
        a, d = dwt_level(a, wavelet)
        details.append(d)
    return WaveletCoeffs(a, tuple(details), wavelet, tuple(lengths))


def idwt(coeffs: WaveletCoeffs):
    a = coeffs.approx
    for d, n in zip(coeffs.details[::-1], coeffs.lengths[::-1]):
        a = idwt_level(a, d, coeffs.wavelet, n)
    return a
