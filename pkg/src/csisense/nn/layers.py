"""Network building blocks: linear/conv layers, batch norm, encoder and heads."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .autograd import Value, conv2d_nhwc


class Module:
    """Minimal parameter container; subclasses register Values/Modules as attributes."""

    training = True

    def named_parameters(self, prefix=""):
        for key, val in vars(self).items():
            if isinstance(val, Value) and val.requires_grad:
                yield prefix + key, val
            elif isinstance(val, Module):
                yield from val.named_parameters(prefix + key + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def buffers(self, prefix=""):
        """Non-trainable state (batch-norm running statistics)."""
        for key, val in vars(self).items():
            if isinstance(val, Module):
                yield from val.buffers(prefix + key + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.buffers(f"{prefix}{key}.{i}.")
        for key in getattr(self, "_buffer_names", ()):
            yield prefix + key, getattr(self, key)

    def state_dict(self):
        state = {name: p.data for name, p in self.named_parameters()}
        state.update(dict(self.buffers()))
        return state

    def load_state_dict(self, state):
        params = dict(self.named_parameters())
        expected = set(self.state_dict())
        if set(state) != expected:
            missing, extra = sorted(expected - set(state)), sorted(set(state) - expected)
            raise ValidationError(f"state keys differ: missing {missing}, unexpected {extra}", "state")
        for name, arr in state.items():
            if name in params:
                if params[name].shape != arr.shape:
                    raise ValidationError(f"shape mismatch for {name}: {arr.shape} vs {params[name].shape}")
                params[name].data = np.array(arr, dtype=params[name].dtype)
        self._load_buffers(state, "")

    def _load_buffers(self, state, prefix):
        for key, val in vars(self).items():
            if isinstance(val, Module):
                val._load_buffers(state, prefix + key + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        item._load_buffers(state, f"{prefix}{key}.{i}.")
        for key in getattr(self, "_buffer_names", ()):
            if prefix + key in state:
                setattr(self, key, np.array(state[prefix + key], dtype=getattr(self, key).dtype))

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def train(self, mode=True):
        self.training = mode
        for val in vars(self).values():
            if isinstance(val, Module):
                val.train(mode)
            elif isinstance(val, (list, tuple)):
                for item in val:
                    if isinstance(item, Module):
                        item.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def __call__(self, x):
        return self.forward(x)


def _uniform(rng, bound, shape, dtype):
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear(Module):
    def __init__(self, n_in, n_out, rng, dtype=np.float64, bias=True):
        bound = 1.0 / np.sqrt(n_in)
        self.weight = Value(_uniform(rng, bound, (n_in, n_out), dtype), requires_grad=True)
        self.bias = Value(_uniform(rng, bound, (n_out,), dtype), requires_grad=True) if bias else None

    def forward(self, x):
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class Conv2d(Module):
    """Channels-last convolution; weight layout (kh, kw, c_in, c_out)."""

    def __init__(self, c_in, c_out, kernel, stride, padding, rng, dtype=np.float64):
        kh, kw = _pair(kernel)
        bound = 1.0 / np.sqrt(c_in * kh * kw)
        self.weight = Value(_uniform(rng, bound, (kh, kw, c_in, c_out), dtype), requires_grad=True)
        self.bias = Value(_uniform(rng, bound, (c_out,), dtype), requires_grad=True)
        self.stride = _pair(stride)
        self.padding = _pair(padding)

    def forward(self, x):
        return conv2d_nhwc(x, self.weight, self.bias, self.stride, self.padding)


class BatchNorm1d(Module):
    """Batch statistics while training, running averages in eval mode."""

    _buffer_names = ("running_mean", "running_var")

    def __init__(self, n, momentum=0.1, eps=1e-5, dtype=np.float64):
        self.gamma = Value(np.ones(n, dtype=dtype), requires_grad=True)
        self.beta = Value(np.zeros(n, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(n, dtype=dtype)
        self.running_var = np.ones(n, dtype=dtype)
        self.momentum = momentum
        self.eps = eps

    def forward(self, x):
        if self.training:
            mean = x.mean(axis=0, keepdims=True)
            centered = x - mean
            var = (centered * centered).mean(axis=0, keepdims=True)
            n = x.shape[0]
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mean.data[0]
            unbiased = var.data[0] * n / max(n - 1, 1)
            self.running_var = (1 - m) * self.running_var + m * unbiased
            xhat = centered / (var + self.eps).sqrt()
        else:
            xhat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
        return xhat * self.gamma + self.beta


def _pair(v):
    if isinstance(v, (tuple, list)):
        return int(v[0]), int(v[1])
    return int(v), int(v)


def _out_len(n, k, s, p):
    return (n + 2 * p - k) // s + 1


@dataclass(frozen=True)
class ConvStage:
    out_channels: int
    kernel: int
    stride: int


@dataclass(frozen=True)
class EncoderConfig:
    """Three conv stages closed by global average pooling to a 128-d embedding.

    Kernels are square and padded by ``kernel // 2`` on each side.
    """

    stages: tuple = (ConvStage(32, 27, 7), ConvStage(64, 15, 3), ConvStage(128, 7, 1))
    in_channels: int = 1
    embed_dim: int = 128

    @classmethod
    def reduced(cls, in_channels=1):
        """Small-input variant: same channel progression, kernels (7,5,3), strides (3,2,1)."""
        return cls(
            stages=(ConvStage(32, 7, 3), ConvStage(64, 5, 2), ConvStage(128, 3, 1)),
            in_channels=in_channels,
        )

    def output_hw(self, h, w):
        """Spatial size after the conv stack; raises if any stage collapses below 1x1."""
        for i, st in enumerate(self.stages):
            h = _out_len(h, st.kernel, st.stride, st.kernel // 2)
            w = _out_len(w, st.kernel, st.stride, st.kernel // 2)
            if h < 1 or w < 1:
                raise ValidationError(f"encoder stage {i} output {h}x{w} is empty for this input shape")
        return h, w

    def validate(self, input_hw):
        if not self.stages or self.stages[-1].out_channels != self.embed_dim:
            raise ValidationError("final conv stage must emit embed_dim channels")
        self.output_hw(*input_hw)

    def to_dict(self):
        return {
            "stages": [
                {"out_channels": st.out_channels, "kernel": st.kernel, "stride": st.stride}
                for st in self.stages
            ],
            "in_channels": self.in_channels,
            "embed_dim": self.embed_dim,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            stages=tuple(ConvStage(**s) for s in d["stages"]),
            in_channels=d.get("in_channels", 1),
            embed_dim=d.get("embed_dim", 128),
        )


class Encoder(Module):
    def __init__(self, cfg: EncoderConfig, input_hw, rng, dtype=np.float64):
        cfg.validate(input_hw)
        self.cfg = cfg
        self.input_hw = tuple(input_hw)
        convs = []
        c = cfg.in_channels
        for st in cfg.stages:
            convs.append(Conv2d(c, st.out_channels, st.kernel, st.stride, st.kernel // 2, rng, dtype))
            c = st.out_channels
        self.convs = convs

    def forward(self, x):
        if x.shape[1:] != (self.cfg.in_channels, *self.input_hw):
            raise ValidationError(f"encoder built for {(self.cfg.in_channels, *self.input_hw)}, got {x.shape[1:]}")
        h = x.transpose(0, 2, 3, 1)
        last = len(self.convs) - 1
        for i, conv in enumerate(self.convs):
            h = conv(h)
            # the final stage stays linear so no embedding dimension can die
            if i < last:
                h = h.relu()
        return h.mean(axis=(1, 2))


class Projector(Module):
    """g(z) = W2 ReLU(BN(W1 z)), 128 -> 512 -> 128."""

    def __init__(self, rng, dim=128, hidden=512, dtype=np.float64):
        self.fc1 = Linear(dim, hidden, rng, dtype)
        self.bn = BatchNorm1d(hidden, dtype=dtype)
        self.fc2 = Linear(hidden, dim, rng, dtype)

    def forward(self, z):
        return self.fc2(self.bn(self.fc1(z)).relu())


class Predictor(Module):
    """SimSiam prediction head, 128 -> 64 -> 128."""

    def __init__(self, rng, dim=128, hidden=64, dtype=np.float64):
        self.fc1 = Linear(dim, hidden, rng, dtype)
        self.fc2 = Linear(hidden, dim, rng, dtype)

    def forward(self, z):
        return self.fc2(self.fc1(z).relu())


class SslNetwork(Module):
    """Encoder + projector (+ predictor for SimSiam)."""

    def __init__(self, encoder, projector, predictor=None):
        self.encoder = encoder
        self.projector = projector
        self.predictor = predictor

    def forward(self, x):
        return self.projector(self.encoder(x))


class SupervisedNetwork(Module):
    """Encoder, projector and classifier trained jointly."""

    def __init__(self, encoder, projector, n_classes, rng, dtype=np.float64):
        self.encoder = encoder
        self.projector = projector
        self.classifier = Linear(projector.fc2.weight.shape[1], n_classes, rng, dtype)

    def forward(self, x):
        return self.classifier(self.projector(self.encoder(x)))
