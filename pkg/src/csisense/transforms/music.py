"""MUSIC pseudo-spectrum over radial velocity, and the Doppler-shift helper."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, ValidationError
from ..sim import SPEED_OF_LIGHT, steering_vector


@dataclass(frozen=True)
class VelocityGrid:
    v_min: float = -3.0
    v_max: float = 3.0
    steps: int = 601
    values: np.ndarray | None = None

    def __post_init__(self):
        if not (np.isfinite(self.v_min) and np.isfinite(self.v_max) and self.v_min < self.v_max):
            raise ValidationError("need finite v_min < v_max", "v_min")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ValidationError("grid needs at least 2 steps", "steps")
        if self.values is not None:
            vals = np.asarray(self.values, dtype=np.float64)
            if vals.shape != (self.steps,) or not np.all(np.isfinite(vals)) or np.any(vals <= 0):
                raise ValidationError("pseudo-spectrum must be positive, finite and match the grid", "values")
            object.__setattr__(self, "values", vals)

    @property
    def velocities(self):
        return np.linspace(self.v_min, self.v_max, int(self.steps))

    @property
    def step(self):
        return (self.v_max - self.v_min) / (self.steps - 1)

    def peaks(self):
        """Velocities of local maxima above mean + 2 std of the spectrum, highest first."""
        p = self.values
        if p is None:
            return np.array([])
        left = np.r_[-np.inf, p[:-1]]
        right = np.r_[p[1:], -np.inf]
        is_peak = (p > left) & (p >= right) & (p > p.mean() + 2 * p.std())
        idx = np.flatnonzero(is_peak)
        idx = idx[np.argsort(-p[idx], kind="stable")]
        return self.velocities[idx]

    def top_peak(self):
        pk = self.peaks()
        return float(pk[0]) if pk.size else float(self.velocities[int(np.argmax(self.values))])


def smoothed_covariance(snapshots, window):
    """Forward-smoothed covariance from sub-windows of length ``window``.

    ``snapshots`` is (M_s,) or (M_s, K); with K columns the per-column
    covariances are averaged.
    """
    x = np.asarray(snapshots, dtype=np.complex128)
    if x.ndim == 1:
        x = x[:, None]
    subs = np.lib.stride_tricks.sliding_window_view(x, window, axis=0)  # (M_s-w+1, K, w)
    subs = subs.reshape(-1, window)
    return subs.T @ subs.conj() / subs.shape[0]


def music_velocity(snapshots, f_c, dt, n_sources=1, grid: VelocityGrid | None = None, window=None):
    """Pseudo-spectrum P(v) = 1 / |Q_n^H d(v)|^2 on the velocity grid.

    The noise subspace holds the eigenvectors beyond the ``n_sources`` largest
    eigenvalues of the smoothed covariance, whose size defaults to ceil(M_s/2).
    """
    x = np.asarray(snapshots)
    m_s = x.shape[0]
    if m_s < n_sources + 2:
        raise ValidationError(f"need at least n_sources + 2 = {n_sources + 2} snapshots, got {m_s}", "snapshots")
    if n_sources < 1:
        raise ValidationError("n_sources must be >= 1", "n_sources")
    if not np.all(np.isfinite(x)):
        raise ValidationError("snapshots must be finite", "snapshots")
    window = int(window or math.ceil(m_s / 2))
    if n_sources >= window:
        raise ValidationError(f"n_sources ({n_sources}) must be below the sub-window length ({window})", "n_sources")
    grid = grid or VelocityGrid()

    R = smoothed_covariance(x, window)
    scale = max(np.abs(R).max(), np.finfo(float).tiny)
    if np.abs(R - R.conj().T).max() > 1e-10 * scale:
        raise NumericalError("covariance is not Hermitian")
    evals, evecs = np.linalg.eigh(R)
    if evals[0] < -1e-8 * scale:
        raise NumericalError(f"covariance is not positive semi-definite (min eigenvalue {evals[0]:.3g})")
    # eigh sorts ascending: the noise subspace is the leading block
    noise = evecs[:, : window - n_sources]

    v = grid.velocities
    D = np.stack([steering_vector(vi, f_c, dt, window) for vi in v], axis=1)  # (window, steps)
    proj = noise.conj().T @ D
    den = np.sum(np.abs(proj) ** 2, axis=0)
    # an exact subspace hit would give 1/0; floor at rounding level of |d|^2 = window
    den = np.maximum(den, np.finfo(float).eps * window)
    return VelocityGrid(grid.v_min, grid.v_max, grid.steps, 1.0 / den)


def dfs(v, f_c):
    """Doppler shift f_D = v f_c / c in Hz."""
    v, f_c = np.asarray(v, dtype=np.float64), np.asarray(f_c, dtype=np.float64)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(f_c))):
        raise ValidationError("dfs inputs must be finite", "v")
    out = v * f_c / SPEED_OF_LIGHT
    return float(out) if out.ndim == 0 else out
