"""Removal of hardware phase impairments: common phase error, phase differences, antenna ratios."""
from __future__ import annotations

import warnings

import numpy as np

from ..core import CsiTensor, principal_angle
from ..errors import ValidationError

RATIO_FLOOR = 1e-9


def _unit(z):
    mag = np.abs(z)
    return np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 0)


def estimate_cpe(csi: CsiTensor):
    """Per (time, rx, tx): angle of the mean unit phasor over subcarriers, and a validity mask."""
    mean = _unit(csi.data).mean(axis=1)  # (T, M, N)
    valid = np.abs(mean) > 0
    return principal_angle(mean), valid


def cpe_compensate(csi: CsiTensor) -> CsiTensor:
    """Rotate every timestamp by minus its estimated common phase; amplitudes untouched.

    Timestamps whose entries are all zero cannot be estimated; they are left as
    they are and listed under ``meta["cpe_skipped"]``.
    """
    if csi.shape[1] < 2:
        raise ValidationError("CPE compensation needs at least 2 subcarriers", "csi")
    theta, valid = estimate_cpe(csi)
    rot = np.where(valid, np.exp(-1j * theta), 1.0)
    out = csi.data * rot[:, None, :, :]
    meta = dict(csi.meta)
    skipped = np.flatnonzero(~valid.all(axis=(1, 2)))
    if skipped.size:
        warnings.warn(f"{skipped.size} all-zero timestamps skipped in CPE compensation", RuntimeWarning)
        meta["cpe_skipped"] = skipped.tolist()
    return csi.replace(data=out, meta=meta)


AXES = {"time": 0, "subcarrier": 1}


def phase_diff(csi: CsiTensor, axis="subcarrier"):
    """Wrapped phase difference of adjacent entries along ``axis``, in (-pi, pi]."""
    if axis not in AXES:
        raise ValidationError(f"axis must be one of {sorted(AXES)}", "axis")
    ax = AXES[axis]
    h = csi.data
    if h.shape[ax] < 2:
        raise ValidationError(f"phase_diff needs >= 2 entries along {axis}", "axis")
    n = h.shape[ax]
    nxt = np.take(h, np.arange(1, n), axis=ax)
    cur = np.take(h, np.arange(n - 1), axis=ax)
    # arg(h2 * conj(h1)) is the wrapped difference and cancels common factors exactly
    return principal_angle(nxt * np.conj(cur))


def csi_ratio(csi: CsiTensor, rx_i=0, rx_j=1, tx=0, floor=RATIO_FLOOR):
    """H_i / H_j per (time, subcarrier).

    Returns (ratio, flagged): entries whose denominator magnitude is below
    ``floor`` are set to 0 and flagged instead of raising.
    """
    M = csi.shape[2]
    if M < 2:
        raise ValidationError("csi_ratio needs at least 2 receive antennas", "csi")
    if rx_i == rx_j:
        raise ValidationError("rx_i and rx_j must differ", "rx_j")
    for name, idx in (("rx_i", rx_i), ("rx_j", rx_j)):
        if not 0 <= idx < M:
            raise ValidationError(f"{name}={idx} out of range for {M} antennas", name)
    num = csi.data[:, :, rx_i, tx]
    den = csi.data[:, :, rx_j, tx]
    flagged = np.abs(den) < floor
    safe = np.where(flagged, 1.0, den)
    ratio = np.where(flagged, 0, num / safe)
    return ratio, flagged
