"""Supervised baseline, SSL pretraining, frozen-encoder probing and transfer.

Random streams are derived from each run seed with fixed stream ids so that a
(config, seed) pair always reproduces the same weights, batches and views.
"""
from __future__ import annotations

import hashlib
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError, ValidationError
from ..nn import augment
from ..nn.autograd import Value, no_grad
from ..nn.layers import Encoder, Linear, Predictor, Projector, SslNetwork, SupervisedNetwork
from ..nn.losses import collapse_constant, cross_entropy, ssl_loss
from ..nn.optim import Adam
from .config import ExperimentConfig, ProbeReport, SeedResult

log = logging.getLogger(__name__)

# stream ids for np.random.default_rng([seed, stream])
INIT, AUG, LOADER, PROBE, SPLIT, SAMPLE = range(6)


def _rng(seed, stream):
    return np.random.default_rng([int(seed), stream])


# -- data plumbing -------------------------------------------------------------


def split(labels, r, seed):
    """Stratified, seeded train/test split; returns sorted index arrays."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValidationError("cannot split an empty dataset", "dataset")
    if not 0 < r < 1:
        raise ValidationError("split ratio must lie in (0, 1)", "r")
    rng = _rng(seed, SPLIT)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        if idx.size == 1:
            warnings.warn(f"class {c} has a single sample; assigned to train", RuntimeWarning)
            train.extend(idx)
            continue
        n_train = int(np.clip(round(r * idx.size), 1, idx.size - 1))
        train.extend(idx[:n_train])
        test.extend(idx[n_train:])
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(test, dtype=np.int64))


def sample_n_per_class(labels, n, seed):
    """Stratified sampling without replacement of exactly ``n`` indices per class."""
    labels = np.asarray(labels)
    rng = _rng(seed, SAMPLE)
    short = [int(c) for c in np.unique(labels) if np.sum(labels == c) < n]
    if short:
        raise ValidationError(f"classes with fewer than {n} training samples: {short}", "shots")
    picked = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        picked.extend(rng.choice(idx, size=n, replace=False))
    return np.sort(np.array(picked, dtype=np.int64))


def batches(n, batch_size, rng, min_size=1):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        b = order[start : start + batch_size]
        if b.size >= min_size:
            yield b


def weights_digest(module):
    h = hashlib.sha256()
    for name, arr in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


# -- model construction ----------------------------------------------------------


def build_encoder(cfg: ExperimentConfig, input_shape, seed):
    c, h, w = input_shape
    enc_cfg = cfg.encoder
    if enc_cfg.in_channels != c:
        enc_cfg = type(enc_cfg)(stages=enc_cfg.stages, in_channels=c, embed_dim=enc_cfg.embed_dim)
    return Encoder(enc_cfg, (h, w), _rng(seed, INIT), cfg.np_dtype)


def build_ssl_network(cfg: ExperimentConfig, input_shape, seed):
    enc = build_encoder(cfg, input_shape, seed)
    rng = _rng(seed, INIT + 100)
    dim = enc.cfg.embed_dim
    proj = Projector(rng, dim=dim, dtype=cfg.np_dtype)
    pred = Predictor(rng, dim=dim, dtype=cfg.np_dtype) if cfg.algorithm.algorithm == "simsiam" else None
    return SslNetwork(enc, proj, pred)


def embed(encoder, x, batch_size=256):
    """Frozen forward pass in eval mode; returns float64 embeddings."""
    was = encoder.training
    encoder.eval()
    out = []
    with no_grad():
        for start in range(0, len(x), batch_size):
            out.append(encoder(Value(x[start : start + batch_size])).data)
    encoder.train(was)
    return np.concatenate(out).astype(np.float64)


def _finite_or_abort(loss, where):
    val = float(loss.data)
    if not np.isfinite(val):
        raise NumericalError(f"loss diverged (non-finite) during {where}")
    return val


# -- Part 1: supervised ----------------------------------------------------------


@dataclass
class TrainHistory:
    loss: list = field(default_factory=list)
    terms: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)


def train_supervised(cfg: ExperimentConfig, x, y, seed, n_classes=None):
    """Encoder + projector + classifier trained jointly on single-view augmented batches."""
    x = np.asarray(x, dtype=cfg.np_dtype)
    y = np.asarray(y, dtype=np.int64)
    n_classes = int(n_classes or y.max() + 1)
    net_ssl = build_ssl_network(cfg.with_(algorithm=type(cfg.algorithm)()), x.shape[1:], seed)
    net = SupervisedNetwork(net_ssl.encoder, net_ssl.projector, n_classes, _rng(seed, INIT + 200), cfg.np_dtype)
    opt = Adam(net.parameters(), cfg.lr_supervised, weight_decay=cfg.weight_decay)
    aug_rng, loader_rng = _rng(seed, AUG), _rng(seed, LOADER)
    hist = TrainHistory()
    for _ in range(cfg.epochs_ssl):
        net.train()
        losses = []
        for b in batches(len(x), cfg.batch_size, loader_rng, min_size=2):
            xb = augment.augment(x[b], aug_rng)
            loss = cross_entropy(net(Value(xb)), y[b])
            losses.append(_finite_or_abort(loss, "supervised training"))
            opt.zero_grad()
            loss.backward()
            opt.step()
        hist.loss.append(float(np.mean(losses)))
        hist.train_accuracy.append(accuracy(predict(net, x), y))
    return net, hist


def predict(net, x, batch_size=256):
    was = net.training
    net.eval()
    out = []
    with no_grad():
        for start in range(0, len(x), batch_size):
            out.append(net(Value(x[start : start + batch_size])).data)
    net.train(was)
    return np.concatenate(out).argmax(axis=1)


def accuracy(pred, y):
    return float(np.mean(np.asarray(pred) == np.asarray(y)))


def per_class_accuracy(pred, y, n_classes):
    pred, y = np.asarray(pred), np.asarray(y)
    return [float(np.mean(pred[y == c] == c)) if np.any(y == c) else float("nan") for c in range(n_classes)]


# -- Part 2: SSL -----------------------------------------------------------------


def pretrain_ssl(cfg: ExperimentConfig, x, seed):
    """Train encoder + heads on unlabeled ``x`` with the configured objective.

    Only the input array reaches this function, so labels cannot influence it.
    Returns (network, history); history.terms holds the batch-mean VICReg terms per epoch.
    """
    x = np.asarray(x, dtype=cfg.np_dtype)
    if x.ndim != 4:
        raise ValidationError("SSL input must be (B, C, H, W)", "x")
    net = build_ssl_network(cfg, x.shape[1:], seed)
    opt = Adam(net.parameters(), cfg.lr_ssl, weight_decay=cfg.weight_decay)
    aug_rng, loader_rng = _rng(seed, AUG), _rng(seed, LOADER)
    alg = cfg.algorithm
    hist = TrainHistory()
    for epoch in range(cfg.epochs_ssl):
        net.train()
        losses, terms = [], []
        for b in batches(len(x), cfg.batch_size, loader_rng, min_size=2):
            x1, x2 = augment.two_crop(x[b], aug_rng)
            loss = ssl_loss(alg, net, Value(x1), Value(x2), terms)
            losses.append(_finite_or_abort(loss, f"{alg.algorithm} epoch {epoch}"))
            opt.zero_grad()
            loss.backward()
            opt.step()
        hist.loss.append(float(np.mean(losses)))
        if terms:
            hist.terms.append(np.mean(terms, axis=0).tolist())
        log.debug("ssl %s epoch %d loss %.4f", alg.algorithm, epoch, hist.loss[-1])
    return net, hist


def collapse_gate(emb, min_std=0.01, fraction=0.9):
    """True when more than ``fraction`` of embedding dims have std above ``min_std``."""
    std = np.asarray(emb).std(axis=0)
    return bool(np.mean(std > min_std) >= fraction), std


# -- Part 3: few-shot probing --------------------------------------------------------


def train_linear_probe(z, y, n_classes, cfg: ExperimentConfig, seed):
    rng = _rng(seed, PROBE)
    clf = Linear(z.shape[1], n_classes, rng, np.float64)
    opt = Adam(clf.parameters(), cfg.lr_fs, weight_decay=cfg.weight_decay)
    loader_rng = _rng(seed, LOADER + 10)
    curve = []
    for _ in range(cfg.epochs_fs):
        losses = []
        for b in batches(len(z), cfg.fs_batch_size, loader_rng):
            loss = cross_entropy(clf(Value(z[b])), y[b])
            losses.append(_finite_or_abort(loss, "few-shot probe"))
            opt.zero_grad()
            loss.backward()
            opt.step()
        curve.append(float(np.mean(losses)))
    return clf, curve


def few_shot_probe(encoder, x_train, y_train, x_test, y_test, n, cfg: ExperimentConfig, seed, n_classes=None):
    """Linear classifier on ``n`` samples/class over frozen encoder embeddings."""
    if n < 1:
        raise ValidationError("few-shot probing needs n >= 1", "shots")
    y_train = np.asarray(y_train, dtype=np.int64)
    y_test = np.asarray(y_test, dtype=np.int64)
    n_classes = int(n_classes or max(y_train.max(), y_test.max()) + 1)
    few = sample_n_per_class(y_train, n, seed)
    before = weights_digest(encoder)
    xf = np.asarray(x_train[few], dtype=encoder.convs[0].weight.dtype)
    if cfg.probe_augment:
        xf = augment.augment(xf, _rng(seed, AUG + 20))
    z_few = embed(encoder, xf)
    z_test = embed(encoder, np.asarray(x_test, dtype=xf.dtype))
    # centering on the few-shot mean only reparametrizes the classifier bias
    center = z_few.mean(axis=0)
    z_few, z_test = z_few - center, z_test - center
    clf, curve = train_linear_probe(z_few, y_train[few], n_classes, cfg, seed)
    if weights_digest(encoder) != before:
        raise NumericalError("encoder weights changed during probing; freeze violated")
    with no_grad():
        pred = clf(Value(z_test)).data.argmax(axis=1)
    ok, std = collapse_gate(z_test, cfg.collapse_std, cfg.collapse_fraction)
    return SeedResult(
        seed=int(seed),
        accuracy=accuracy(pred, y_test),
        per_class_accuracy=per_class_accuracy(pred, y_test, n_classes),
        embedding_std=std.tolist(),
        collapse_flag=not ok,
    ), curve


# -- orchestration -------------------------------------------------------------------


@dataclass
class Dataset:
    """Arrays ready for the encoder: ``x`` is (B, C, H, W); ``y`` integer labels."""

    x: np.ndarray
    y: np.ndarray

    @property
    def n_classes(self):
        return int(self.y.max()) + 1

    def subset(self, idx):
        return Dataset(self.x[idx], self.y[idx])


def run_ssl_probe(cfg: ExperimentConfig, d1: Dataset, d2: Dataset | None = None, n=None, on_seed=None):
    """Pretrain on D1_train (labels unused), probe on n-shot D2_train, evaluate on D2_test."""
    t0 = time.perf_counter()
    d2 = d1 if d2 is None else d2
    n = cfg.shots if n is None else n
    results, extra = [], {"ssl_loss": {}, "gate_passed": {}, "probe_curves": {}}
    for seed in cfg.seeds:
        tr1, _ = split(d1.y, cfg.split_ratio, seed)
        tr2, te2 = split(d2.y, cfg.split_ratio, seed)
        net, hist = pretrain_ssl(cfg, d1.x[tr1], seed)
        res, curve = few_shot_probe(net.encoder, d2.x[tr2], d2.y[tr2], d2.x[te2], d2.y[te2], n, cfg, seed, d2.n_classes)
        results.append(res)
        extra["ssl_loss"][str(seed)] = hist.loss
        if hist.terms:
            extra.setdefault("vicreg_terms", {})[str(seed)] = hist.terms
        extra["gate_passed"][str(seed)] = not res.collapse_flag
        extra["probe_curves"][str(seed)] = curve
        if res.collapse_flag:
            log.warning("seed %d: anti-collapse gate failed for %s", seed, cfg.algorithm.algorithm)
        if on_seed:
            on_seed(seed, res, net, hist)
    extra["collapse_constant"] = collapse_constant(cfg.batch_size)
    return ProbeReport.aggregate(results, time.perf_counter() - t0, extra)


def random_baseline_probe(cfg: ExperimentConfig, d2: Dataset, n=None):
    """Same probe as :func:`run_ssl_probe` over a freshly initialised, untrained encoder."""
    t0 = time.perf_counter()
    n = cfg.shots if n is None else n
    results = []
    for seed in cfg.seeds:
        tr, te = split(d2.y, cfg.split_ratio, seed)
        enc = build_encoder(cfg, d2.x.shape[1:], seed)
        res, _ = few_shot_probe(enc, d2.x[tr], d2.y[tr], d2.x[te], d2.y[te], n, cfg, seed, d2.n_classes)
        results.append(res)
    return ProbeReport.aggregate(results, time.perf_counter() - t0, {"control": "random_encoder"})


def run_supervised(cfg: ExperimentConfig, d1: Dataset):
    t0 = time.perf_counter()
    results, extra = [], {"loss": {}}
    for seed in cfg.seeds:
        tr, te = split(d1.y, cfg.split_ratio, seed)
        net, hist = train_supervised(cfg, d1.x[tr], d1.y[tr], seed, d1.n_classes)
        pred = predict(net, d1.x[te].astype(cfg.np_dtype))
        z = embed(net.encoder, d1.x[te].astype(cfg.np_dtype))
        ok, std = collapse_gate(z, cfg.collapse_std, cfg.collapse_fraction)
        results.append(
            SeedResult(int(seed), accuracy(pred, d1.y[te]), per_class_accuracy(pred, d1.y[te], d1.n_classes), std.tolist(), not ok)
        )
        extra["loss"][str(seed)] = hist.loss
    return ProbeReport.aggregate(results, time.perf_counter() - t0, extra)


def transfer_run(cfg: ExperimentConfig, d1: Dataset, d2: Dataset, n=None):
    """Pretrain on D1 and probe on D2; input shapes must already agree (see data.reconcile)."""
    if d1.x.shape[1:] != d2.x.shape[1:]:
        raise ValidationError(f"irreconcilable input shapes {d1.x.shape[1:]} vs {d2.x.shape[1:]}", "shape")
    return run_ssl_probe(cfg, d1, d2, n)
