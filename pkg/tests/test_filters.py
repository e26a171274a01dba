import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csisense.errors import ValidationError
from csisense.preprocess import filters
from csisense.preprocess.filters import Series

finite = st.floats(-1e3, 1e3, allow_nan=False)
series_values = st.lists(finite, min_size=7, max_size=40)


def vals(s):
    return s.values.tolist()


def test_series_validation():
    with pytest.raises(ValidationError):
        Series([])
    with pytest.raises(ValidationError):
        Series([1.0, np.inf])
    with pytest.raises(ValidationError):
        Series([1.0], dt=0)


# -- smoothing ------------------------------------------------------------------


def test_moving_average_examples():
    assert vals(filters.moving_average([1, 2, 3, 4, 5], 3)) == [1.5, 2, 3, 4, 4.5]
    x = np.random.default_rng(0).normal(size=9)
    assert np.array_equal(filters.moving_average(x, 1).values, x)
    assert np.allclose(filters.moving_average(np.full(6, 2.5), 5).values, 2.5)


@pytest.mark.parametrize("w", [2, 0, 7, 1.5])
def test_moving_average_bad_window(w):
    with pytest.raises(ValidationError):
        filters.moving_average([1, 2, 3, 4, 5], w)


def clipped_mean_oracle(x, w):
    h = w // 2
    return [np.mean(x[max(0, i - h) : i + h + 1]) for i in range(len(x))]


@settings(max_examples=40, deadline=None)
@given(series_values, st.sampled_from([1, 3, 5, 7]))
def test_moving_average_oracle_and_length(x, w):
    out = filters.moving_average(x, w).values
    assert out.shape == (len(x),) and np.all(np.isfinite(out))
    assert np.allclose(out, clipped_mean_oracle(np.array(x), w), atol=1e-9)


def test_weighted_ma():
    x = np.random.default_rng(1).normal(size=12)
    assert np.allclose(filters.weighted_ma(x, np.full(5, 0.2)).values, filters.moving_average(x, 5).values)
    # edge renormalization: first output uses weights [0.5, 0.25] rescaled to [2/3, 1/3]
    out = filters.weighted_ma([3.0, 6.0, 9.0], [0.25, 0.5, 0.25]).values
    assert out[0] == pytest.approx(2 / 3 * 3 + 1 / 3 * 6)
    assert out[1] == pytest.approx(6.0)
    with pytest.raises(ValidationError):
        filters.weighted_ma(x, [0.3, 0.3, 0.3])


def test_ewma():
    assert vals(filters.ewma([0, 1, 1], 0.5)) == [0, 0.5, 0.75]
    x = np.random.default_rng(2).normal(size=10)
    assert np.array_equal(filters.ewma(x, 1.0).values, x)
    for bad in (0, 1.5, -0.1):
        with pytest.raises(ValidationError):
            filters.ewma(x, bad)


def test_median_examples():
    assert vals(filters.median_filter([1, 1, 9, 1, 1], 3)) == [1, 1, 1, 1, 1]
    x = np.random.default_rng(3).normal(size=5)
    assert np.array_equal(filters.median_filter(x, 1).values, x)


def sort_and_pick_oracle(x, w):
    h = w // 2
    out = []
    for i in range(len(x)):
        win = sorted(x[max(0, i - h) : i + h + 1])
        m = len(win)
        out.append(win[m // 2] if m % 2 else 0.5 * (win[m // 2 - 1] + win[m // 2]))
    return out


def test_median_matches_oracle():
    x = np.random.default_rng(4).normal(size=60)
    assert np.allclose(filters.median_filter(x, 5).values, sort_and_pick_oracle(list(x), 5), atol=0)


def test_median_idempotent_on_plateaus():
    x = np.repeat([0.0, 3.0, -1.0, 2.0], 6)
    once = filters.median_filter(x, 3)
    assert np.array_equal(filters.median_filter(once, 3).values, once.values)


# -- outliers -------------------------------------------------------------------


def test_hampel_examples():
    out, mask = filters.hampel([1, 1, 1, 100, 1, 1, 1], w=5, n_sigma=3)
    assert vals(out) == [1] * 7 and mask.sum() == 1 and mask[3]
    out, mask = filters.hampel(np.full(10, 4.0))
    assert np.all(out.values == 4.0) and not mask.any()


def test_hampel_zero_mad_flags_any_deviation():
    _, mask = filters.hampel([1, 1, 1, 1.001, 1, 1, 1], w=5)
    assert mask.tolist() == [False, False, False, True, False, False, False]


def test_hampel_gaussian_spikes():
    rng = np.random.default_rng(7)
    x = rng.normal(size=2000)
    where = rng.choice(2000, 5, replace=False)
    x[where] += 20 * np.sign(rng.normal(size=5))
    # short windows estimate the MAD poorly; w=5 flags about 7% of clean Gaussian points
    _, mask = filters.hampel(x, w=31, n_sigma=3)
    assert mask[where].all()
    false_flags = np.delete(mask, where).sum()
    assert false_flags <= 0.01 * 2000


def lof_oracle(x, k):
    """Textbook LOF written with explicit loops."""
    n = len(x)
    dist = [[float(np.linalg.norm(x[i] - x[j])) for j in range(n)] for i in range(n)]
    neigh, kd = [], []
    for i in range(n):
        order = sorted((dist[i][j], j) for j in range(n) if j != i)
        neigh.append([j for _, j in order[:k]])
        kd.append(order[k - 1][0])
    lrd = []
    for i in range(n):
        reach = [max(dist[i][j], kd[j]) for j in neigh[i]]
        lrd.append(1.0 / (sum(reach) / k))
    return np.array([sum(lrd[j] for j in neigh[i]) / k / lrd[i] for i in range(n)])


def test_lof_matches_oracle():
    x = np.random.default_rng(5).normal(size=(30, 2))
    assert np.allclose(filters.lof_scores(x, 5), lof_oracle(x, 5), rtol=1e-12)


def test_lof_grid_interior():
    g = np.array([(i, j) for i in range(7) for j in range(7)], dtype=float)
    scores = filters.lof_scores(g, 4)
    interior = [(1 <= a <= 5) and (1 <= b <= 5) for a, b in g]
    assert np.all((scores[interior] >= 0.8) & (scores[interior] <= 1.2))
    assert np.allclose(scores, lof_oracle(g, 4), rtol=1e-12)


def test_lof_outlier_is_max_and_simplex_symmetric():
    rng = np.random.default_rng(6)
    pts = np.vstack([rng.normal(scale=0.1, size=(20, 3)), [[5.0, 5.0, 5.0]]])
    assert np.argmax(filters.lof_scores(pts, 5)) == 20
    simplex = np.eye(4)
    s = filters.lof_scores(simplex, 3)
    assert np.allclose(s, s[0])


def test_lof_duplicates_capped():
    pts = np.vstack([np.zeros((5, 2)), [[1.0, 1.0]]])
    s = filters.lof_scores(pts, 3)
    assert np.all(np.isfinite(s)) and np.allclose(s[:5], 1.0)
    with pytest.raises(ValidationError):
        filters.lof_scores(pts, 6)


# -- frequency and wavelet domains -------------------------------------------------


def tone(f, n=200, dt=0.01):
    return np.sin(2 * np.pi * f * dt * np.arange(n))


def test_lowpass_passband_stopband_and_mix():
    s2, s40 = tone(2.0), tone(40.0)
    assert np.max(np.abs(filters.lowpass(Series(s2, 0.01), 10).values - s2)) < 1e-8
    assert np.max(np.abs(filters.lowpass(Series(s40, 0.01), 10).values)) < 1e-8
    assert np.max(np.abs(filters.lowpass(Series(s2 + s40, 0.01), 10).values - s2)) < 1e-8
    with pytest.raises(ValidationError):
        filters.lowpass(Series(s2, 0.01), 50)


@pytest.mark.parametrize("name", ["haar", "db4"])
def test_dwt_denoise_zero_threshold_identity(name):
    x = np.random.default_rng(8).normal(size=101)
    assert np.max(np.abs(filters.dwt_denoise(x, name, 3, 0).values - x)) < 1e-10
    assert np.allclose(filters.dwt_denoise(np.full(64, 1.7), name, 3).values, 1.7, atol=1e-10)


def test_dwt_denoise_reduces_error_on_ramp():
    rng = np.random.default_rng(9)
    clean = np.linspace(0, 5, 512)
    noisy = clean + rng.normal(scale=0.1, size=512)
    out = filters.dwt_denoise(noisy, "db4", 4).values
    assert np.mean((out - clean) ** 2) < np.mean((noisy - clean) ** 2)


def test_dwt_denoise_too_short():
    with pytest.raises(ValidationError):
        filters.dwt_denoise(np.ones(7), "haar", 3)


def test_universal_threshold_formula():
    d = np.array([-2.0, 1.0, 0.5, -0.5, 3.0])
    assert filters.universal_threshold(d, 100) == pytest.approx(1.0 / 0.6745 * np.sqrt(2 * np.log(100)))
    assert np.array_equal(filters.soft_threshold(np.array([-3.0, 0.5, 2.0]), 1.0), [-2.0, 0.0, 1.0])
