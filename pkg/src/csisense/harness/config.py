"""Experiment configuration and report types."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import ValidationError
from ..nn.layers import EncoderConfig
from ..nn.losses import SslLossConfig

MODES = ("supervised", "ssl_pretrain", "few_shot_probe", "transfer")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "few_shot_probe"
    algorithm: SslLossConfig = field(default_factory=SslLossConfig)
    epochs_ssl: int = 50
    epochs_fs: int = 20
    lr_ssl: float = 0.01
    lr_fs: float = 0.001
    lr_supervised: float = 0.001
    batch_size: int = 64
    fs_batch_size: int = 64
    shots: int = 10
    split_ratio: float = 0.8
    seeds: tuple = (0, 1, 2, 3, 4)
    weight_decay: float = 1e-4
    encoder: EncoderConfig = field(default_factory=EncoderConfig.reduced)
    dtype: str = "float32"
    probe_augment: bool = False
    collapse_std: float = 0.01
    collapse_fraction: float = 0.9

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}", "mode")
        for name in ("epochs_ssl", "epochs_fs"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0", name)
        for name in ("lr_ssl", "lr_fs", "lr_supervised"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0", name)
        if self.batch_size < 2 or self.fs_batch_size < 1:
            raise ValidationError("batch sizes must be positive (SSL batches need >= 2)", "batch_size")
        if self.shots < 0:
            raise ValidationError("shots must be >= 0", "shots")
        if not 0 < self.split_ratio < 1:
            raise ValidationError("split_ratio must lie in (0, 1)", "split_ratio")
        if not self.seeds:
            raise ValidationError("at least one seed is required", "seeds")
        if self.dtype not in ("float32", "float64"):
            raise ValidationError("dtype must be float32 or float64", "dtype")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @classmethod
    def transfer_defaults(cls, **overrides):
        """Defaults of the cross-dataset transfer protocol (larger SSL batch, longer probe)."""
        base = dict(mode="transfer", batch_size=128, epochs_fs=100, fs_batch_size=64)
        base.update(overrides)
        return cls(**base)

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        d = asdict(self)
        d["algorithm"] = self.algorithm.to_dict()
        d["encoder"] = self.encoder.to_dict()
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("mode") == "transfer":
            base = cls.transfer_defaults().to_dict()
            base.update(d)
            d = base
        if "algorithm" in d:
            alg = d["algorithm"]
            d["algorithm"] = SslLossConfig(algorithm=alg) if isinstance(alg, str) else SslLossConfig.from_dict(alg)
        if "encoder" in d:
            enc = d["encoder"]
            if enc == "default":
                d["encoder"] = EncoderConfig()
            elif enc == "reduced":
                d["encoder"] = EncoderConfig.reduced()
            else:
                d["encoder"] = EncoderConfig.from_dict(enc)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}", sorted(unknown)[0])
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SeedResult:
    seed: int
    accuracy: float
    per_class_accuracy: list
    embedding_std: list
    collapse_flag: bool = False


@dataclass
class ProbeReport:
    """Mean over seeds, with every per-seed result retained."""

    accuracy: float
    per_class_accuracy: list
    embedding_std: list
    seeds_used: list
    runtime_s: float
    per_seed: list = field(default_factory=list)
    collapse_flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @classmethod
    def aggregate(cls, results, runtime_s, extra=None):
        acc = [r.accuracy for r in results]
        if any(not 0.0 <= a <= 1.0 for a in acc):
            raise ValidationError("accuracy outside [0, 1]", "accuracy")
        return cls(
            accuracy=float(np.mean(acc)),
            per_class_accuracy=np.mean([r.per_class_accuracy for r in results], axis=0).tolist(),
            embedding_std=np.mean([r.embedding_std for r in results], axis=0).tolist(),
            seeds_used=[r.seed for r in results],
            runtime_s=float(runtime_s),
            per_seed=[asdict(r) for r in results],
            collapse_flags=[r.collapse_flag for r in results],
            extra=dict(extra or {}),
        )

    def to_dict(self):
        return asdict(self)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
