from __future__ import annotations

import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrnews.benchmark import (
    INDICATORS,
    BenchmarkGrid,
    BenchmarkParams,
    detrend_gaussian,
    gaussian_smooth,
    historical_taus,
    kendall_tau_trend,
    pre_crisis_taus,
    rank_p_value,
    rolling_indicators,
    sensitivity_analysis,
    significance_test,
    sliding_kendall_taus,
)
from mrnews.errors import DegenerateSegmentWarning, InsufficientHistory, WindowTooLong

seeds = st.integers(0, 2**32 - 1)


def tau_oracle(y) -> float:
    """O(n^2) concordant/discordant count against the index sequence, tau-b."""
    n = len(y)
    s = 0
    for i, j in itertools.combinations(range(n), 2):
        s += (y[j] > y[i]) - (y[j] < y[i])
    n0 = n * (n - 1) // 2
    ties = sum(c * (c - 1) // 2 for c in (list(y).count(v) for v in set(y)))
    return s / np.sqrt(n0 * (n0 - ties)) if ties < n0 else 0.0


def random_walk(n, seed=0, drift=0.0):
    return 100 * np.exp(np.cumsum(np.random.default_rng(seed).normal(drift, 0.01, n)))


def test_linear_ramp_interior_residuals():
    bw = 10
    x = 3.0 * np.arange(400) + 7
    res = x - gaussian_smooth(x, bw)
    half = 4 * bw
    assert np.abs(res[half:-half]).max() < 1e-6 * 3.0 * bw


def test_constant_series_zero_residuals():
    x = np.full(300, 5.0)
    assert np.all(x - gaussian_smooth(x, 25) == 0)


def test_zero_bandwidth_identity():
    x = random_walk(50)
    assert np.array_equal(gaussian_smooth(x, 0), x)
    assert np.array_equal(gaussian_smooth(x, 0.2), x)


def test_detrend_reconstructs():
    prices = random_walk(900, drift=0.002)  # drift keeps the peak near the crisis
    det = detrend_gaussian(prices, 800, BenchmarkParams())
    assert np.abs(det.smooth + det.residuals - det.prices).max() <= 1e-12
    assert det.peak == int(np.argmax(prices[300:800])) + 300
    assert det.prices.size == 500


def test_detrend_needs_history():
    with pytest.raises(InsufficientHistory):
        detrend_gaussian(random_walk(300), 250, BenchmarkParams())


def test_white_noise_acf_near_zero():
    # windows overlap heavily, so pool independent series before counting
    rng = np.random.default_rng(1)
    acf = np.concatenate([rolling_indicators(rng.normal(size=1200), 200).acf1 for _ in range(20)])
    assert np.mean(np.abs(acf) < 3 / np.sqrt(200)) >= 0.95


def test_ar1_acf_near_coefficient():
    rng = np.random.default_rng(2)
    x = np.zeros(3000)
    for t in range(1, x.size):
        x[t] = 0.9 * x[t - 1] + rng.normal()
    acf = rolling_indicators(x, 250).acf1
    assert np.mean(np.abs(acf - 0.9) < 0.1) >= 0.9


def test_scale_equivariance():
    x = np.random.default_rng(3).normal(size=400)
    a, b = rolling_indicators(x, 100), rolling_indicators(7 * x, 100)
    np.testing.assert_allclose(b.variance, 49 * a.variance, rtol=1e-12)
    np.testing.assert_allclose(b.acf1, a.acf1, rtol=1e-10)


def test_low_frequency_power_band():
    x = np.random.default_rng(4).normal(size=250)
    w = 100
    seg = x[:w] - x[:w].mean()
    p = np.abs(np.fft.rfft(seg)[1:]) ** 2 / w
    assert rolling_indicators(x, w).low_freq_power[0] == pytest.approx(p[:5].mean(), rel=1e-12)


def test_window_too_long():
    with pytest.raises(WindowTooLong):
        rolling_indicators(np.zeros(50), 60)


def test_kendall_examples():
    assert kendall_tau_trend(np.arange(10.0)) == 1.0
    assert kendall_tau_trend(-np.arange(10.0)) == -1.0
    assert kendall_tau_trend([1, 3, 2]) == pytest.approx(1 / 3, abs=1e-15)
    with pytest.warns(DegenerateSegmentWarning):
        assert kendall_tau_trend(np.ones(8)) == 0.0


@settings(max_examples=200, deadline=None)
@given(seeds, st.integers(2, 50), st.integers(2, 8))
def test_kendall_matches_oracle(seed, n, levels):
    y = np.random.default_rng(seed).integers(0, levels, n).astype(float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert kendall_tau_trend(y) == tau_oracle(y.tolist())


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 40))
def test_sliding_matches_direct(seed, lkw):
    y = np.round(np.random.default_rng(seed).normal(size=120), 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        direct = [kendall_tau_trend(y[i : i + lkw]) for i in range(y.size - lkw + 1)]
    assert sliding_kendall_taus(y, lkw).tolist() == direct


def test_grid_defaults_and_length_constraint():
    valid, rejected = BenchmarkGrid().combinations()
    assert len(valid) + rejected == 3 * 4 * 6 * 6
    assert all(p.lkw + p.lkend <= 500 - p.rolling_window for p in valid)
    with pytest.raises(ValueError):
        BenchmarkParams(rolling_window=250, lkw=250, lkend=10)


def test_forced_trend_passes_sensitivity():
    # a price path whose residual variance grows steadily before the crisis
    rng = np.random.default_rng(5)
    n = 1200
    amp = np.exp(np.linspace(0, 4, n))
    prices = 1000 + np.arange(n) * 0.5 + amp * rng.normal(size=n)
    grid = BenchmarkGrid(kernel_bandwidth=(10.0,), rolling_window=(100, 150), lkw=(125, 150), lkend=(0, 10))
    hist = sensitivity_analysis(prices, n - 1, grid)
    assert hist.passes("variance")
    assert hist.fraction("variance", 1) == 1.0


def test_white_noise_fails_sensitivity():
    prices = 100 + np.random.default_rng(6).normal(size=1200)
    hist = sensitivity_analysis(prices, 1100)
    for name in INDICATORS:
        t = hist.taus[name]
        assert np.mean(np.abs(t) >= 0.8) < 0.5


@settings(max_examples=10, deadline=None)
@given(seeds, st.floats(0.1, 10), st.floats(-50, 50))
def test_affine_prices_same_taus(seed, a, b):
    prices = random_walk(700, seed, drift=0.003)
    p = BenchmarkParams()
    t1 = pre_crisis_taus(prices, 690, p)
    t2 = pre_crisis_taus(a * prices + b, 690, p)
    for name in INDICATORS:
        assert t2[name] == pytest.approx(t1[name], abs=1e-9)


def test_rank_p_value_extremes():
    pool = np.arange(20.0)
    assert rank_p_value(19.0, pool, 1) == 1 / 20
    assert rank_p_value(9.5, pool, 1) == 0.5
    assert rank_p_value(0.0, pool, -1) == 1 / 20


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(-1, 1))
def test_adding_self_never_lowers_p(seed, pre):
    pool = np.random.default_rng(seed).uniform(-1, 1, 30)
    for d in (1, -1):
        assert rank_p_value(pre, pool, d, include_self=True) >= rank_p_value(pre, pool, d) - 1e-15


def test_significance_pool():
    prices = random_walk(1600, 7)
    res = significance_test(prices, 1500)
    pools = historical_taus(prices, 1500, BenchmarkParams())
    for name in INDICATORS:
        r = res[name]
        assert 0 <= r.p_value <= 1
        assert r.tau == pools[name][-1]
        assert r.n_segments == 1000 - 150 + 1 - 200 + 1


def test_significance_needs_history():
    with pytest.raises(InsufficientHistory):
        significance_test(random_walk(900), 850)
