import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csisense.errors import ValidationError
from csisense.nn import losses
from csisense.nn.autograd import Value


def nt_xent_oracle(z, tau):
    zn = z / np.linalg.norm(z, axis=1, keepdims=True)
    n2 = len(z)
    total = 0.0
    for a in range(n2):
        pos = a ^ 1
        den = sum(np.exp(zn[a] @ zn[i] / tau) for i in range(n2) if i != a)
        total += -np.log(np.exp(zn[a] @ zn[pos] / tau) / den)
    return total / n2


def barlow_oracle(za, zb, lam):
    def standardize(z):
        return (z - z.mean(0)) / z.std(0)

    a, b = standardize(za), standardize(zb)
    d = a.shape[1]
    C = np.zeros((d, d))
    for i, j in itertools.product(range(d), range(d)):
        C[i, j] = np.sum(a[:, i] * b[:, j]) / (np.sqrt(np.sum(a[:, i] ** 2)) * np.sqrt(np.sum(b[:, j] ** 2)))
    on = sum((1 - C[i, i]) ** 2 for i in range(d))
    off = sum(C[i, j] ** 2 for i in range(d) for j in range(d) if i != j)
    return on + lam * off


def vicreg_oracle(za, zb, lam=25.0, mu=1.0, gamma=1.0):
    B, d = za.shape
    inv = np.mean([np.sum((za[b] - zb[b]) ** 2) for b in range(B)])
    var = cov = 0.0
    for z in (za, zb):
        m = z.mean(0)
        for i in range(d):
            vi = sum((z[b, i] - m[i]) ** 2 for b in range(B)) / (B - 1)
            var += max(0.0, gamma - vi)
            for j in range(d):
                if i != j:
                    cij = sum((z[b, i] - m[i]) * (z[b, j] - m[j]) for b in range(B)) / (B - 1)
                    cov += cij**2
    return inv + lam * var + mu * cov


def test_nt_xent_total_collapse():
    z = np.ones((4, 8))
    assert float(losses.nt_xent(z, 0.5).data) == pytest.approx(np.log(3), abs=1e-9)
    assert float(losses.nt_xent(np.ones((10, 3)), 0.1).data) == pytest.approx(np.log(9), abs=1e-9)
    assert losses.collapse_constant(2) == pytest.approx(1.0986122886681098, abs=1e-12)


def test_nt_xent_orthogonal_pairs_enumeration():
    e = np.eye(4)
    z = np.stack([e[0], e[0], e[1], e[1]])
    # hand enumeration: cos(anchor, positive) = 1, cos to the other pair = 0
    expected = -np.log(np.exp(2.0) / (np.exp(2.0) + 2.0))
    assert float(losses.nt_xent(z, 0.5).data) == pytest.approx(expected, abs=1e-12)
    assert float(losses.nt_xent(z, 0.5).data) == pytest.approx(nt_xent_oracle(z, 0.5), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(2, 5), st.integers(0, 10**6), st.floats(0.1, 2.0))
def test_nt_xent_oracle_and_scale_invariance(n, d, seed, tau):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(2 * n, d))
    val = float(losses.nt_xent(z, tau).data)
    assert val == pytest.approx(nt_xent_oracle(z, tau), rel=1e-9)
    scaled = z * rng.uniform(0.1, 10, size=(2 * n, 1))
    assert float(losses.nt_xent(scaled, tau).data) == pytest.approx(val, rel=1e-9)


def test_nt_xent_needs_negatives():
    with pytest.raises(ValidationError):
        losses.nt_xent(np.ones((2, 3)))


def test_simsiam_aligned_and_orthogonal():
    p = np.array([[1.0, 0.0], [0.0, 2.0]])
    assert float(losses.simsiam_loss(p, p, p, p).data) == pytest.approx(-1.0)
    q = np.array([[0.0, 3.0], [1.0, 0.0]])
    assert float(losses.simsiam_loss(p, q, p, q).data) == pytest.approx(0.0, abs=1e-15)


def test_simsiam_detached_gradient_exactly_zero():
    rng = np.random.default_rng(0)
    p1, p2 = (Value(rng.normal(size=(4, 3)), requires_grad=True) for _ in range(2))
    z1, z2 = (Value(rng.normal(size=(4, 3)), requires_grad=True) for _ in range(2))
    losses.simsiam_loss(p1, z2, p2, z1).backward()
    for z in (z1, z2):
        assert z.grad is None or np.all(z.grad == 0.0)
    assert np.any(p1.grad != 0)


def test_simsiam_zero_norm_warns():
    p = np.array([[0.0, 0.0], [1.0, 0.0]])
    with pytest.warns(RuntimeWarning):
        val = float(losses.simsiam_loss(p, p, p, p).data)
    assert val == pytest.approx(-0.5, abs=1e-6)


def decorrelated(B=8, d=4, seed=0):
    """Columns orthogonal, zero mean, unit (biased) variance."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(B, d + 1)))
    ones = np.ones((B, 1)) / np.sqrt(B)
    q = q - ones @ (ones.T @ q)
    q, _ = np.linalg.qr(q)
    return q[:, :d] * np.sqrt(B)


def test_barlow_fixed_point():
    z = decorrelated()
    assert float(losses.barlow_twins_loss(z, z, 5e-3).data) == pytest.approx(0.0, abs=1e-12)


def test_barlow_lambda_zero_is_invariance_only():
    rng = np.random.default_rng(2)
    za, zb = rng.normal(size=(8, 4)), rng.normal(size=(8, 4))
    C = losses.barlow_cross_correlation(za, zb).data
    assert float(losses.barlow_twins_loss(za, zb, 0.0).data) == pytest.approx(np.sum((1 - np.diag(C)) ** 2))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_barlow_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    za, zb = rng.normal(size=(8, 4)), rng.normal(size=(8, 4))
    assert float(losses.barlow_twins_loss(za, zb, 5e-3).data) == pytest.approx(barlow_oracle(za, zb, 5e-3), abs=1e-8)


def test_barlow_zero_variance_rejected():
    z = np.ones((4, 2))
    with pytest.raises(ValidationError):
        losses.barlow_twins_loss(z, z)


def test_vicreg_fixed_point():
    # unbiased variance exactly 1 on orthogonal columns
    z = decorrelated(8, 4) * np.sqrt(7 / 8)
    assert float(losses.vicreg_loss(z, z).data) == pytest.approx(0.0, abs=1e-12)


def test_vicreg_total_collapse_variance_term():
    z = np.full((6, 5), 0.3)
    inv, var, cov = losses.vicreg_terms(z, z, gamma=1.0)
    assert float(var.data) == pytest.approx(2 * 5 * 1.0)  # d * gamma per branch, both branches
    assert float(inv.data) == 0.0 and float(cov.data) == 0.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_vicreg_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    za, zb = rng.normal(size=(6, 3)) * 0.7, rng.normal(size=(6, 3))
    assert float(losses.vicreg_loss(za, zb).data) == pytest.approx(vicreg_oracle(za, zb), abs=1e-8)


def test_cross_entropy_uniform_logits():
    assert float(losses.cross_entropy(np.zeros((3, 4)), [0, 1, 2]).data) == pytest.approx(np.log(4))


def test_config_validation():
    with pytest.raises(ValidationError):
        losses.SslLossConfig(algorithm="moco")
    with pytest.raises(ValidationError):
        losses.SslLossConfig(temperature=0)
    with pytest.raises(ValidationError):
        losses.SslLossConfig(vic=losses.VicWeights(gamma=0))
    cfg = losses.SslLossConfig("vicreg", vic=losses.VicWeights(var_weight=10))
    assert losses.SslLossConfig.from_dict(cfg.to_dict()) == cfg


def test_defaults():
    cfg = losses.SslLossConfig()
    assert (cfg.temperature, cfg.bt_lambda) == (0.5, 5e-3)
    assert vars(cfg.vic) == {"inv_weight": 1.0, "var_weight": 25.0, "cov_weight": 1.0, "gamma": 1.0}


def test_warning_free_on_normal_input():
    rng = np.random.default_rng(0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        losses.simsiam_loss(*[rng.normal(size=(3, 2)) for _ in range(4)])
