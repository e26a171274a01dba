"""Principal component analysis and low-rank factorization via the SVD."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class PcaModel:
    components: np.ndarray  # (p, k), orthonormal columns
    mean: np.ndarray
    explained_variance: np.ndarray
    total_variance: float = 1.0

    @property
    def explained_ratio(self):
        return self.explained_variance / self.total_variance

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.components

    def inverse_transform(self, z):
        return z @ self.components.T + self.mean


def _matrix(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or not np.all(np.isfinite(x)):
        raise ValidationError("expected a finite 2-D matrix", "x")
    return x


def pca_fit(x, k):
    """Centered PCA; variances use the n-1 normalization of the sample covariance."""
    x = _matrix(x)
    n, p = x.shape
    if n < 2:
        raise ValidationError("PCA needs at least 2 rows", "x")
    if not 1 <= k <= min(n, p):
        raise ValidationError(f"k must lie in [1, {min(n, p)}]", "k")
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    var = s**2 / (n - 1)
    comps = vt[:k].T
    # sign convention: largest-magnitude loading of each component is positive
    signs = np.sign(comps[np.argmax(np.abs(comps), axis=0), np.arange(k)])
    comps = comps * np.where(signs == 0, 1.0, signs)
    return PcaModel(comps, mean, var[:k], float(var.sum()) or 1.0)


def pca_transform(model: PcaModel, x):
    return model.transform(x)


def lrf(x, r):
    """Best rank-r factors (U, V) with U @ V.T minimizing the Frobenius error."""
    x = _matrix(x)
    if not 1 <= r <= min(x.shape):
        raise ValidationError(f"rank must lie in [1, {min(x.shape)}]", "r")
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    return u[:, :r] * s[:r], vt[:r].T


def lrf_error(x, r):
    """Frobenius error predicted by the discarded singular values."""
    s = np.linalg.svd(_matrix(x), compute_uv=False)
    return float(np.sqrt(np.sum(s[r:] ** 2)))
