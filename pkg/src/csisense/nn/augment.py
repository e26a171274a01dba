"""Input augmentations used to build SSL views."""
from __future__ import annotations

import numpy as np

NOISE_STD = 0.01
MASK_PROB = 0.1


def gaussian_noise(x, rng, std=NOISE_STD):
    return x + rng.normal(0.0, std, size=x.shape).astype(x.dtype, copy=False)


def random_mask(x, rng, p=MASK_PROB):
    """Zero each entry independently with probability ``p``."""
    keep = rng.random(x.shape) >= p
    return x * keep


def augment(x, rng, std=NOISE_STD, p=MASK_PROB):
    """One draw of the augmentation family: mask(noise(x))."""
    return random_mask(gaussian_noise(x, rng, std), rng, p)


def two_crop(x, seed_or_rng, std=NOISE_STD, p=MASK_PROB):
    """Two independent augmentations of the same batch."""
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else np.random.default_rng(seed_or_rng)
    x = np.asarray(x)
    return augment(x, rng, std, p), augment(x, rng, std, p)
