"""Shared oracles for the test suite."""
from __future__ import annotations

import numpy as np

from csisense.nn import autograd as ag
from csisense.nn import losses
from csisense.nn.autograd import Value
from csisense.nn.layers import BatchNorm1d, Linear


def numeric_grad(f, arrays, i, h=1e-6):
    """Central differences of scalar ``f(*arrays)`` with respect to ``arrays[i]``."""
    x = arrays[i]
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f(*arrays)
        x[idx] = old - h
        fm = f(*arrays)
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b):
    num = np.linalg.norm(a - b)
    den = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
    return num / den


def check_gradients(fn, arrays):
    """Largest relative error between autograd and central differences over all inputs.

    ``fn`` maps Values to a scalar Value.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    vals = [Value(a.copy(), requires_grad=True) for a in arrays]
    out = fn(*vals)
    out.backward()

    def scalar(*arrs):
        with ag.no_grad():
            return float(fn(*[Value(a) for a in arrs]).data)

    worst = 0.0
    for i, v in enumerate(vals):
        num = numeric_grad(scalar, arrays, i)
        ana = np.zeros_like(arrays[i]) if v.grad is None else v.grad
        worst = max(worst, rel_error(ana, num))
    return worst


def _weighted(out, w):
    return (out * w).sum()


def _away_from_zero(rng, shape, margin=0.1):
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-12) * margin, x)


def gradient_cases(seed=0, per_op=3):
    """(name, fn, arrays) triples covering every differentiable op, with random shapes."""
    rng = np.random.default_rng(seed)
    cases = []

    def shape(nd=2, lo=2, hi=5):
        return tuple(int(s) for s in rng.integers(lo, hi, size=nd))

    for _ in range(per_op):
        s = shape()
        w = rng.normal(size=s)
        cases += [
            ("add_broadcast", lambda a, b, w=w: _weighted(a + b, w), [rng.normal(size=s), rng.normal(size=(1, s[1]))]),
            ("sub", lambda a, b, w=w: _weighted(a - b, w), [rng.normal(size=s), rng.normal(size=s)]),
            ("mul_broadcast", lambda a, b, w=w: _weighted(a * b, w), [rng.normal(size=s), rng.normal(size=(s[0], 1))]),
            ("div", lambda a, b, w=w: _weighted(a / b, w), [rng.normal(size=s), rng.uniform(0.5, 2.0, size=s)]),
            ("rdiv", lambda a, w=w: _weighted(2.0 / a, w), [rng.uniform(0.5, 2.0, size=s)]),
            ("pow", lambda a, w=w: _weighted(a**3, w), [rng.normal(size=s)]),
            ("exp", lambda a, w=w: _weighted(a.exp(), w), [rng.normal(size=s)]),
            ("log", lambda a, w=w: _weighted(a.log(), w), [rng.uniform(0.5, 2.0, size=s)]),
            ("sqrt", lambda a, w=w: _weighted(a.sqrt(), w), [rng.uniform(0.5, 2.0, size=s)]),
            ("sin_cos", lambda a, w=w: _weighted(a.sin() * a.cos(), w), [rng.normal(size=s)]),
            ("tanh", lambda a, w=w: _weighted(a.tanh(), w), [rng.normal(size=s)]),
            ("relu", lambda a, w=w: _weighted(a.relu(), w), [_away_from_zero(rng, s)]),
            ("sum_axis", lambda a, w=w: _weighted(a.sum(axis=0, keepdims=True), w[:1]), [rng.normal(size=s)]),
            ("mean_axis", lambda a, w=w: _weighted(a.mean(axis=1), w[:, 0]), [rng.normal(size=s)]),
            ("var_ddof1", lambda a, w=w: _weighted(a.var(axis=0, ddof=1), w[0]), [rng.normal(size=s)]),
            ("reshape", lambda a, w=w: _weighted(a.reshape(-1), w.reshape(-1)), [rng.normal(size=s)]),
            ("transpose", lambda a, w=w: _weighted(a.T, w.T), [rng.normal(size=s)]),
            ("getitem_dup", lambda a, w=w: _weighted(a[np.array([0, 0, 1])], w[np.array([0, 0, 1])]), [rng.normal(size=s)]),
            ("logsumexp", lambda a, w=w: _weighted(a.logsumexp(axis=1), w[:, 0]), [rng.normal(size=s)]),
            ("concat", lambda a, b, w=w: _weighted(ag.concat([a, b], axis=0), np.concatenate([w, w])), [rng.normal(size=s), rng.normal(size=s)]),
            ("stack", lambda a, b, w=w: _weighted(ag.stack([a, b], axis=1), np.stack([w, -w], axis=1)), [rng.normal(size=s), rng.normal(size=s)]),
            ("where", lambda a, b, w=w: _weighted(ag.where(w > 0, a, b), w), [rng.normal(size=s), rng.normal(size=s)]),
        ]
        k = int(rng.integers(2, 5))
        cases.append(("matmul", lambda a, b: (a @ b).tanh().sum(), [rng.normal(size=(s[0], k)), rng.normal(size=(k, s[1]))]))

        b, h, wd = int(rng.integers(1, 3)), int(rng.integers(4, 7)), int(rng.integers(4, 7))
        cin, cout, kh = int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
        stride, pad = int(rng.integers(1, 3)), kh // 2
        x = rng.normal(size=(b, h, wd, cin))
        wt = rng.normal(size=(kh, kh, cin, cout))
        bias = rng.normal(size=cout)
        ho, wo = (h + 2 * pad - kh) // stride + 1, (wd + 2 * pad - kh) // stride + 1
        wout = rng.normal(size=(b, ho, wo, cout))
        cases.append((
            "conv2d_nhwc",
            lambda x, wt, bias, s=stride, p=pad, wout=wout: _weighted(ag.conv2d_nhwc(x, wt, bias, (s, s), (p, p)), wout),
            [x, wt, bias],
        ))

        n, d = int(rng.integers(4, 7)), int(rng.integers(2, 5))
        lin = Linear(d, 3, np.random.default_rng(int(rng.integers(1 << 30))))
        wl = rng.normal(size=(n, 3))

        def linear_fn(x, wmat, bvec, lin=lin, wl=wl):
            lin.weight, lin.bias = wmat, bvec
            return _weighted(lin(x), wl)

        cases.append(("linear", linear_fn, [rng.normal(size=(n, d)), lin.weight.data.copy(), lin.bias.data.copy()]))

        bn_w = rng.normal(size=(n, d))

        def bn_fn(x, bn_w=bn_w, d=d):
            bn = BatchNorm1d(d)
            return _weighted(bn(x), bn_w)

        cases.append(("batchnorm_train", bn_fn, [rng.normal(size=(n, d))]))

        za, zb = rng.normal(size=(n, d)), rng.normal(size=(n, d))
        cases += [
            ("nt_xent", lambda z: losses.nt_xent(z, 0.5), [rng.normal(size=(2 * n, d))]),
            ("barlow_twins", lambda a, b: losses.barlow_twins_loss(a, b, 5e-3), [za, zb]),
            ("vicreg", lambda a, b: losses.vicreg_loss(a, b), [za * 0.3, zb * 0.3]),
            ("simsiam", lambda p1, p2, za=za, zb=zb: losses.simsiam_loss(p1, Value(zb), p2, Value(za)), [rng.normal(size=(n, d)), rng.normal(size=(n, d))]),
            ("cross_entropy", lambda lg, y=rng.integers(0, d, size=n): losses.cross_entropy(lg, y), [rng.normal(size=(n, d))]),
            ("l2_normalize", lambda z, w=rng.normal(size=(n, d)): _weighted(losses.l2_normalize(z), w), [rng.normal(size=(n, d))]),
        ]
    return cases
