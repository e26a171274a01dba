"""Conversion of CSI records into encoder-ready arrays."""
from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .protocol import Dataset


def csi_to_image(csi):
    """Amplitude laid out as (channels=M*N, H=subcarriers, W=time), standardized per sample."""
    amp = np.abs(csi.data)  # (T, S, M, N)
    T, S, M, N = amp.shape
    img = amp.reshape(T, S, M * N).transpose(2, 1, 0)
    mu, sd = img.mean(), img.std()
    return (img - mu) / (sd if sd > 0 else 1.0)


def to_dataset(samples, shape=None):
    """``samples`` is a list of (CsiTensor, label); all tensors must share one shape."""
    if not samples:
        raise ValidationError("empty sample list", "dataset")
    imgs = [csi_to_image(c) for c, _ in samples]
    if shape is not None:
        imgs = [reconcile(im, shape) for im in imgs]
    shapes = {im.shape for im in imgs}
    if len(shapes) != 1:
        raise ValidationError(f"mixed input shapes {sorted(shapes)}", "shape")
    return Dataset(np.stack(imgs), np.array([lab for _, lab in samples], dtype=np.int64))


def reconcile(img, shape):
    """Crop or zero-pad a (C, H, W) image to ``shape``; channel count must match."""
    c, h, w = shape
    if img.shape[0] != c:
        raise ValidationError(f"channel mismatch {img.shape[0]} vs {c}", "shape")
    out = np.zeros(shape, dtype=img.dtype)
    hh, ww = min(h, img.shape[1]), min(w, img.shape[2])
    out[:, :hh, :ww] = img[:, :hh, :ww]
    return out
