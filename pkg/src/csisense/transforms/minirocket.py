"""MiniRocket random-convolution features and a closed-form ridge classifier.

Uses the standard fixed kernel set: 84 length-9 kernels with weight -1 everywhere
except +2 at three of the nine taps (all C(9,3) placements). Each feature is the
proportion of positive values (PPV) of one dilated convolution above one bias.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..errors import ValidationError

KERNEL_LEN = 9
KERNEL_INDICES = np.array(list(combinations(range(KERNEL_LEN), 3)), dtype=np.int64)
NUM_KERNELS = len(KERNEL_INDICES)
DEFAULT_FEATURES = 10_000
MAX_DILATIONS = 32


def kernel_weights():
    w = -np.ones((NUM_KERNELS, KERNEL_LEN))
    w[np.arange(NUM_KERNELS)[:, None], KERNEL_INDICES] = 2.0
    return w


@dataclass(frozen=True)
class MiniRocketModel:
    dilations: np.ndarray
    features_per_dilation: np.ndarray
    biases: np.ndarray  # grouped by dilation, then kernel
    input_length: int

    @property
    def kernels(self):
        return kernel_weights()

    @property
    def feature_count(self):
        return int(self.biases.size)

    def to_dict(self):
        return {
            "dilations": self.dilations.tolist(),
            "features_per_dilation": self.features_per_dilation.tolist(),
            "biases": self.biases.tolist(),
            "input_length": self.input_length,
        }


def fit_dilations(length, num_features=DEFAULT_FEATURES, max_dilations=MAX_DILATIONS):
    per_kernel = num_features // NUM_KERNELS
    n_dil = min(per_kernel, max_dilations)
    multiplier = per_kernel / n_dil
    max_exp = np.log2((length - 1) / (KERNEL_LEN - 1))
    dil, counts = np.unique(np.floor(2.0 ** np.linspace(0, max_exp, n_dil)).astype(np.int64), return_counts=True)
    counts = (counts * multiplier).astype(np.int64)
    remainder = per_kernel - counts.sum()
    i = 0
    while remainder > 0:
        counts[i] += 1
        remainder -= 1
        i = (i + 1) % counts.size
    return dil, counts


def quantile_levels(n):
    # low-discrepancy sequence of golden-ratio fractional parts
    return (np.arange(1, n + 1) * (np.sqrt(5) + 1) / 2) % 1


def _conv_all(x, dilation):
    """Convolve (n, L) series with all 84 kernels at one dilation, zero 'same' padding.

    Returns (84, n, L). Built from one shared -sum term plus 3x shifted copies
    for the three +2 taps of each kernel.
    """
    n, L = x.shape
    half = KERNEL_LEN // 2
    shifted = np.zeros((KERNEL_LEN, n, L))
    for j in range(KERNEL_LEN):
        off = (j - half) * dilation
        if off >= 0:
            if off < L:
                shifted[j, :, : L - off] = x[:, off:]
        elif -off < L:
            shifted[j, :, -off:] = x[:, : L + off]
    base = -shifted.sum(axis=0)
    tripled = 3.0 * shifted
    return base[None] + tripled[KERNEL_INDICES].sum(axis=1)


def _padding_on(dilation_index, kernel_index):
    return (dilation_index + kernel_index) % 2 == 0


def _valid_slice(dilation, L, padded):
    if padded:
        return slice(0, L)
    p = (KERNEL_LEN - 1) * dilation // 2
    return slice(p, L - p) if L - 2 * p > 0 else slice(0, L)


def _check_series(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None]
    if x.ndim != 2:
        raise ValidationError("expected a series matrix (n, length)", "x")
    if x.shape[1] < KERNEL_LEN:
        raise ValidationError(f"series length must be >= {KERNEL_LEN}", "x")
    if not np.all(np.isfinite(x)):
        raise ValidationError("series must be finite", "x")
    return x


def minirocket_fit(x, seed=0, num_features=DEFAULT_FEATURES):
    """Choose dilations and bias quantiles from training series ``x`` (n, length).

    Rows are first put in a content-defined order, so the fitted model does not
    depend on the order of the training set.
    """
    x = _check_series(x)
    L = x.shape[1]
    x = x[np.lexsort(x.T[::-1])]
    dil, per_dil = fit_dilations(L, num_features)
    keep = (KERNEL_LEN - 1) * dil <= L - 1
    if not np.all(keep):
        warnings.warn(f"dropping dilations {dil[~keep].tolist()} longer than the series", RuntimeWarning)
        dil, per_dil = dil[keep], per_dil[keep]
    q = quantile_levels(NUM_KERNELS * per_dil.sum())
    rng = np.random.default_rng(seed)
    biases = []
    pos = 0
    for di, (d, nf) in enumerate(zip(dil, per_dil)):
        pick = rng.integers(0, x.shape[0], NUM_KERNELS)
        conv = _conv_all(x[pick], int(d))  # (84, 84, L): kernel k on example pick[k]
        for k in range(NUM_KERNELS):
            biases.append(np.quantile(conv[k, k], q[pos: pos + nf]))
            pos += nf
    return MiniRocketModel(dil, per_dil, np.concatenate(biases), L)


def minirocket_transform(model: MiniRocketModel, x, chunk=128):
    x = _check_series(x)
    if x.shape[1] != model.input_length:
        raise ValidationError(f"model fitted on length {model.input_length}, got {x.shape[1]}", "x")
    out = np.empty((x.shape[0], model.feature_count))
    for start in range(0, x.shape[0], chunk):
        out[start: start + chunk] = _transform_block(model, x[start: start + chunk])
    return out


def _transform_block(model, x):
    L = x.shape[1]
    feats = np.empty((x.shape[0], model.feature_count))
    pos = 0
    for di, (d, nf) in enumerate(zip(model.dilations, model.features_per_dilation)):
        conv = _conv_all(x, int(d))
        for k in range(NUM_KERNELS):
            b = model.biases[pos: pos + nf]
            c = conv[k][:, _valid_slice(int(d), L, _padding_on(di, k))]
            feats[:, pos: pos + nf] = (c[:, None, :] > b[None, :, None]).mean(axis=2)
            pos += nf
    return feats


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray  # (d, n_classes)
    intercept: np.ndarray
    classes: np.ndarray
    feature_mean: np.ndarray
    feature_scale: np.ndarray

    def decision_function(self, features):
        z = (np.asarray(features, dtype=np.float64) - self.feature_mean) / self.feature_scale
        return z @ self.weights + self.intercept


def ridge_classify_fit(features, labels, l2=1.0, standardize=True):
    """One-vs-rest ridge regression on +-1 targets, solved in closed form.

    Features are centered (and optionally scaled to unit variance) so the
    unpenalized intercept is the target mean. The dual system is used when
    there are more features than samples.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValidationError("ridge classifier needs at least 2 classes", "labels")
    if not l2 > 0:
        raise ValidationError("l2 must be > 0", "l2")
    mean = X.mean(axis=0)
    scale = X.std(axis=0) if standardize else np.ones(X.shape[1])
    scale = np.where(scale > 0, scale, 1.0)
    Z = (X - mean) / scale
    Y = np.where(y[:, None] == classes[None, :], 1.0, -1.0)
    intercept = Y.mean(axis=0)
    Yc = Y - intercept
    n, d = Z.shape
    if d > n:
        W = Z.T @ np.linalg.solve(Z @ Z.T + l2 * np.eye(n), Yc)
    else:
        W = np.linalg.solve(Z.T @ Z + l2 * np.eye(d), Z.T @ Yc)
    return RidgeModel(W, intercept, classes, mean, scale)


def ridge_predict(model: RidgeModel, features):
    return model.classes[np.argmax(model.decision_function(features), axis=1)]
