"""A small reverse-mode automatic differentiation engine over numpy arrays.

Every :class:`Value` wraps an ``ndarray``. Operations on values that require
gradients record their parents plus a closure that maps the output gradient to
parent gradients. :meth:`Value.backward` walks the graph in reverse
topological order, visiting each node once.
"""
from __future__ import annotations

import contextlib

import numpy as np

from ..errors import NumericalError, ValidationError


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording the graph (inference / frozen encoders)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def as_value(x):
    return x if isinstance(x, Value) else Value(x)


class Value:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed", "name")

    # make numpy defer to our reflected operators
    __array_priority__ = 1000

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self._consumed = False
        self.name = name

    # -- bookkeeping --------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Value(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        """Stop-gradient view: shares ``data`` but carries no op record."""
        return Value(self.data)

    def zero_grad(self):
        self.grad = None

    @staticmethod
    def _make(data, parents, backward):
        parents = tuple(parents)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            return Value(data, requires_grad=True, _parents=parents, _backward=backward)
        return Value(data)

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``.

        The graph is consumed: a second call on the same root raises.
        """
        if grad is None:
            if self.data.size != 1:
                raise ValidationError("backward() requires a scalar root or an explicit grad")
            grad = np.ones_like(self.data)
        if self._consumed:
            raise RuntimeError("graph already consumed by a previous backward(); rebuild it")
        if not self.requires_grad:
            return

        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            if node._consumed:
                raise RuntimeError("graph already consumed by a previous backward(); rebuild it")
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            for p, pg in zip(node._parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
            node._consumed = True
            node._backward = None
            node._parents = ()
        self._consumed = True

    # -- elementwise arithmetic ---------------------------------------------

    def __add__(self, other):
        other = as_value(other)
        a, b = self.shape, other.shape
        return Value._make(
            self.data + other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)),
        )

    __radd__ = __add__

    def __neg__(self):
        return Value._make(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        other = as_value(other)
        a, b = self.shape, other.shape
        return Value._make(
            self.data - other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a), _unbroadcast(-g, b)),
        )

    def __rsub__(self, other):
        return as_value(other) - self

    def __mul__(self, other):
        other = as_value(other)
        x, y = self.data, other.data
        return Value._make(
            x * y,
            (self, other),
            lambda g: (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_value(other)
        x, y = self.data, other.data
        out = x / y
        return Value._make(
            out,
            (self, other),
            lambda g: (_unbroadcast(g / y, x.shape), _unbroadcast(-g * out / y, y.shape)),
        )

    def __rtruediv__(self, other):
        return as_value(other) / self

    def __pow__(self, p):
        if isinstance(p, Value):
            raise TypeError("only constant exponents are supported")
        x = self.data
        return Value._make(x**p, (self,), lambda g: (g * p * x ** (p - 1),))

    def __matmul__(self, other):
        other = as_value(other)
        x, y = self.data, other.data
        if x.ndim != 2 or y.ndim != 2:
            raise ValidationError("matmul supports 2-D operands only")
        return Value._make(x @ y, (self, other), lambda g: (g @ y.T, x.T @ g))

    def __rmatmul__(self, other):
        return as_value(other) @ self

    # -- unary functions ----------------------------------------------------

    def exp(self):
        out = np.exp(self.data)
        return Value._make(out, (self,), lambda g: (g * out,))

    def log(self):
        x = self.data
        return Value._make(np.log(x), (self,), lambda g: (g / x,))

    def sqrt(self):
        out = np.sqrt(self.data)
        return Value._make(out, (self,), lambda g: (g * 0.5 / out,))

    def sin(self):
        x = self.data
        return Value._make(np.sin(x), (self,), lambda g: (g * np.cos(x),))

    def cos(self):
        x = self.data
        return Value._make(np.cos(x), (self,), lambda g: (-g * np.sin(x),))

    def tanh(self):
        out = np.tanh(self.data)
        return Value._make(out, (self,), lambda g: (g * (1.0 - out * out),))

    def relu(self):
        mask = self.data > 0
        return Value._make(self.data * mask, (self,), lambda g: (g * mask,))

    # -- reductions and shape ops -------------------------------------------

    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Value._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), back)

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.data.size
        else:
            axes = (axis,) if np.isscalar(axis) else axis
            n = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def var(self, axis=None, keepdims=False, ddof=0):
        """Variance along ``axis`` (``ddof=1`` for the unbiased estimator)."""
        centered = self - self.mean(axis=axis, keepdims=True)
        if axis is None:
            n = self.data.size
        else:
            axes = (axis,) if np.isscalar(axis) else axis
            n = int(np.prod([self.shape[a] for a in axes]))
        return (centered * centered).sum(axis=axis, keepdims=keepdims) * (1.0 / (n - ddof))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        return Value._make(self.data.reshape(shape), (self,), lambda g: (g.reshape(old),))

    def transpose(self, *axes):
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = np.argsort(axes)
        return Value._make(self.data.transpose(axes), (self,), lambda g: (g.transpose(inv),))

    @property
    def T(self):
        return self.transpose()

    def __getitem__(self, idx):
        if isinstance(idx, Value):
            raise TypeError("index with arrays, not Values")
        shape, dtype = self.shape, self.data.dtype

        def back(g):
            out = np.zeros(shape, dtype=dtype)
            np.add.at(out, idx, g)
            return (out,)

        return Value._make(self.data[idx], (self,), back)

    def logsumexp(self, axis=-1, keepdims=False):
        x = self.data
        m = x.max(axis=axis, keepdims=True)
        e = np.exp(x - m)
        s = e.sum(axis=axis, keepdims=True)
        out = np.log(s) + m
        soft = e / s

        def back(g):
            if not keepdims:
                g = np.expand_dims(g, axis)
            return (g * soft,)

        return Value._make(out if keepdims else np.squeeze(out, axis=axis), (self,), back)


# -- free functions ------------------------------------------------------------


def concat(values, axis=0):
    values = [as_value(v) for v in values]
    sizes = [v.shape[axis] for v in values]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    return Value._make(np.concatenate([v.data for v in values], axis=axis), values, back)


def stack(values, axis=0):
    values = [as_value(v) for v in values]

    def back(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(values)))

    return Value._make(np.stack([v.data for v in values], axis=axis), values, back)


def relu(x):
    return as_value(x).relu()


def where(mask, a, b):
    """Select ``a`` where ``mask`` else ``b``; ``mask`` is a constant array."""
    a, b = as_value(a), as_value(b)
    mask = np.asarray(mask, dtype=bool)
    return Value._make(
        np.where(mask, a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(g * mask, a.shape), _unbroadcast(g * ~mask, b.shape)),
    )


def conv2d_nhwc(x, weight, bias=None, stride=(1, 1), padding=(0, 0)):
    """2-D cross-correlation on channels-last input.

    ``x`` is (B, H, W, C) and ``weight`` is (kh, kw, C, O); output is (B, Ho, Wo, O).
    Implemented as im2col followed by a single matmul.
    """
    x, weight = as_value(x), as_value(weight)
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    B, H, W, C = x.shape
    kh, kw, Cw, O = weight.shape
    if Cw != C:
        raise ValidationError(f"conv2d: input has {C} channels, weight expects {Cw}")
    xp = x.data
    if ph or pw:
        xp = np.pad(xp, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    Hp, Wp = xp.shape[1], xp.shape[2]
    Ho = (Hp - kh) // sh + 1
    Wo = (Wp - kw) // sw + 1
    if Ho < 1 or Wo < 1:
        raise ValidationError(f"conv2d: kernel {kh}x{kw} larger than padded input {Hp}x{Wp}")

    # window view is (B, Ho, Wo, C, kh, kw); reorder to (B, Ho, Wo, kh, kw, C)
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    win = win[:, : (Ho - 1) * sh + 1 : sh, : (Wo - 1) * sw + 1 : sw]
    cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(B * Ho * Wo, kh * kw * C)
    wmat = weight.data.reshape(kh * kw * C, O)
    out = cols @ wmat
    if bias is not None:
        bias = as_value(bias)
        out += bias.data
    out = out.reshape(B, Ho, Wo, O)
    need_x = x.requires_grad

    def back(g):
        g2 = g.reshape(B * Ho * Wo, O)
        gw = (cols.T @ g2).reshape(weight.shape)
        gb = g2.sum(axis=0) if bias is not None else None
        gx = None
        if need_x:
            # (kh*kw*C, B*Ho*Wo) -> (kh, kw, B, Ho, Wo, C) so every tap is contiguous
            dcols = (g2 @ wmat.T).reshape(B, Ho, Wo, kh, kw, C).transpose(3, 4, 0, 1, 2, 5)
            dcols = np.ascontiguousarray(dcols)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, i : i + (Ho - 1) * sh + 1 : sh, j : j + (Wo - 1) * sw + 1 : sw] += dcols[i, j]
            gx = gxp[:, ph : ph + H, pw : pw + W]
        return (gx, gw) if bias is None else (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Value._make(out, parents, back)


def conv2d(x, weight, bias=None, stride=(1, 1), padding=(0, 0)):
    """2-D cross-correlation on NCHW input with an OIHW weight."""
    x, weight = as_value(x), as_value(weight)
    out = conv2d_nhwc(x.transpose(0, 2, 3, 1), weight.transpose(2, 3, 1, 0), bias, stride, padding)
    return out.transpose(0, 3, 1, 2)


def _pair(v):
    if isinstance(v, (tuple, list)):
        return int(v[0]), int(v[1])
    return int(v), int(v)


def check_finite(v, what="value"):
    arr = v.data if isinstance(v, Value) else np.asarray(v)
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite {what}")
