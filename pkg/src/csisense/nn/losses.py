"""Self-supervised objectives and the supervised cross-entropy, on :class:`Value` inputs."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from .autograd import as_value, stack

ALGORITHMS = ("simclr", "simsiam", "barlow_twins", "vicreg")


@dataclass(frozen=True)
class VicWeights:
    inv_weight: float = 1.0
    var_weight: float = 25.0
    cov_weight: float = 1.0
    gamma: float = 1.0


@dataclass(frozen=True)
class SslLossConfig:
    algorithm: str = "simclr"
    temperature: float = 0.5
    bt_lambda: float = 5e-3
    vic: VicWeights = field(default_factory=VicWeights)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown SSL algorithm {self.algorithm!r}", "algorithm")
        if not self.temperature > 0:
            raise ValidationError("temperature must be > 0", "temperature")
        v = self.vic
        if self.bt_lambda < 0 or min(v.inv_weight, v.var_weight, v.cov_weight) < 0:
            raise ValidationError("loss weights must be >= 0", "weights")
        if not v.gamma > 0:
            raise ValidationError("gamma must be > 0", "gamma")

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "temperature": self.temperature,
            "bt_lambda": self.bt_lambda,
            "vic": vars(self.vic).copy(),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        vic = VicWeights(**d.pop("vic", {}))
        return cls(vic=vic, **d)


def l2_normalize(z, eps=1e-12):
    norm = ((z * z).sum(axis=1, keepdims=True) + eps).sqrt()
    return z / norm


def nt_xent(z, temperature=0.5):
    """NT-Xent over 2N rows where rows (2i, 2i+1) form the positive pairs.

    Every row is an anchor; the denominator runs over all rows except the
    anchor itself (the positive is included).
    """
    z = as_value(z)
    n2 = z.shape[0]
    if n2 % 2 or n2 < 4:
        raise ValidationError("nt_xent needs 2N rows with N >= 2", "z")
    zn = l2_normalize(z)
    sim = (zn @ zn.T) * (1.0 / temperature)
    # large negative on the diagonal removes self-similarity from the denominator
    mask = np.eye(n2, dtype=sim.dtype) * -1e9
    logits = sim + mask
    pos = np.arange(n2) ^ 1
    return (logits.logsumexp(axis=1) - logits[np.arange(n2), pos]).mean()


def interleave(a, b):
    """Stack two (N, d) views into (2N, d) with pairs on adjacent rows."""
    a, b = as_value(a), as_value(b)
    return stack([a, b], axis=1).reshape(2 * a.shape[0], a.shape[1])


def negative_cosine(p, z):
    """Row-mean of -cos(p_b, z_b); zero-norm rows contribute similarity 0."""
    p, z = as_value(p), as_value(z)
    pn = np.sqrt((p.data**2).sum(axis=1))
    zn = np.sqrt((z.data**2).sum(axis=1))
    if np.any(pn == 0) or np.any(zn == 0):
        warnings.warn("zero-norm row in negative_cosine; its similarity is taken as 0", RuntimeWarning)
    cos = (l2_normalize(p) * l2_normalize(z)).sum(axis=1)
    return -cos.mean()


def simsiam_loss(p1, z2, p2, z1):
    """1/2 [D(p1, sg(z2)) + D(p2, sg(z1))] with D the negative cosine similarity."""
    z1 = as_value(z1).detach()
    z2 = as_value(z2).detach()
    return (negative_cosine(p1, z2) + negative_cosine(p2, z1)) * 0.5


def _batch_standardize(z, what):
    std = z.data.std(axis=0)
    if np.any(std == 0):
        raise ValidationError(f"{what}: zero-variance embedding dimension {int(np.argmax(std == 0))}", "z")
    centered = z - z.mean(axis=0, keepdims=True)
    return centered / (centered * centered).mean(axis=0, keepdims=True).sqrt()


def barlow_cross_correlation(za, zb):
    """Cross-correlation of batch-normalized embeddings along the batch axis."""
    za, zb = as_value(za), as_value(zb)
    if za.shape[0] < 2:
        raise ValidationError("barlow twins needs a batch of at least 2", "z")
    a = _batch_standardize(za, "barlow_twins")
    b = _batch_standardize(zb, "barlow_twins")
    num = a.T @ b
    na = (a * a).sum(axis=0).sqrt().reshape(-1, 1)
    nb = (b * b).sum(axis=0).sqrt().reshape(1, -1)
    return num / (na * nb)


def barlow_twins_loss(za, zb, lam=5e-3):
    c = barlow_cross_correlation(za, zb)
    d = c.shape[0]
    eye = np.eye(d, dtype=c.dtype)
    on = ((1.0 - c) * eye) ** 2
    off = (c * (1.0 - eye)) ** 2
    return on.sum() + off.sum() * lam


def vicreg_terms(za, zb, gamma=1.0):
    """Return (invariance, variance, covariance) terms, each summed over both branches."""
    za, zb = as_value(za), as_value(zb)
    B = za.shape[0]
    if B < 2:
        raise ValidationError("vicreg needs a batch of at least 2", "z")
    diff = za - zb
    inv = (diff * diff).sum(axis=1).mean()
    var_t = None
    cov_t = None
    for z in (za, zb):
        centered = z - z.mean(axis=0, keepdims=True)
        cov = (centered.T @ centered) * (1.0 / (B - 1))
        d = cov.shape[0]
        eye = np.eye(d, dtype=cov.dtype)
        var = (cov * eye).sum(axis=0)
        hinge = (gamma - var).relu().sum()
        offd = ((cov * (1.0 - eye)) ** 2).sum()
        var_t = hinge if var_t is None else var_t + hinge
        cov_t = offd if cov_t is None else cov_t + offd
    return inv, var_t, cov_t


def vicreg_loss(za, zb, weights: VicWeights = VicWeights()):
    inv, var, cov = vicreg_terms(za, zb, weights.gamma)
    return inv * weights.inv_weight + var * weights.var_weight + cov * weights.cov_weight


def cross_entropy(logits, labels):
    logits = as_value(logits)
    labels = np.asarray(labels, dtype=np.int64)
    return (logits.logsumexp(axis=1) - logits[np.arange(len(labels)), labels]).mean()


def ssl_loss(cfg: SslLossConfig, net, x1, x2, terms=None):
    """Forward both views through ``net`` and evaluate the configured objective.

    For VICReg, the (invariance, variance, covariance) values are appended to
    ``terms`` when a list is given.
    """
    e1, e2 = net.encoder(x1), net.encoder(x2)
    z1, z2 = net.projector(e1), net.projector(e2)
    if cfg.algorithm == "simclr":
        return nt_xent(interleave(z1, z2), cfg.temperature)
    if cfg.algorithm == "simsiam":
        p1, p2 = net.predictor(z1), net.predictor(z2)
        return simsiam_loss(p1, z2, p2, z1)
    if cfg.algorithm == "barlow_twins":
        return barlow_twins_loss(z1, z2, cfg.bt_lambda)
    inv, var, cov = vicreg_terms(z1, z2, cfg.vic.gamma)
    if terms is not None:
        terms.append([float(inv.data), float(var.data), float(cov.data)])
    w = cfg.vic
    return inv * w.inv_weight + var * w.var_weight + cov * w.cov_weight


def collapse_constant(n_pairs):
    """NT-Xent value when every embedding coincides: log(2N - 1)."""
    return float(np.log(2 * n_pairs - 1))

