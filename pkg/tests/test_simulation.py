from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrnews.errors import AxisMismatch, InvalidRange, PriceFloorWarning
from mrnews.indicators import detect_peaks
from mrnews.market_data import continuous_log_returns
from mrnews.simulation import (
    PROFILES,
    CalibrationConfig,
    ConfusionSummary,
    CojumpLog,
    SimConfig,
    calibrate_risk_level,
    evaluate_warning,
    frequency_grid,
    simulate_paths,
)


def brute_confusion(peaks, truth_days, h, T):
    covered = set()
    for p in peaks:
        covered.update(range(p, min(p + h, T - 1) + 1))
    truth = set(truth_days)
    tp = sum(1 for d in range(T) if d in covered and d in truth)
    fp = sum(1 for d in range(T) if d in covered and d not in truth)
    fn = sum(1 for d in range(T) if d not in covered and d in truth)
    return tp, fp, T - tp - fp - fn, fn


def test_no_cojumps_pure_diffusion():
    panel, log = simulate_paths(SimConfig(n_days=5, p_cojump_pos=0, p_cojump_neg=0, seed=1))
    assert log.events == ()
    r = continuous_log_returns(panel)
    assert np.abs(r).max() < 0.01


def test_default_scale_60000_returns():
    cfg = SimConfig()
    panel, log = simulate_paths(cfg)
    r = continuous_log_returns(panel)
    assert cfg.n_steps == 60000
    assert r.shape == (60000, 5)
    assert log.count(1) == pytest.approx(60, abs=3 * math.sqrt(60))
    assert log.count(-1) == pytest.approx(60, abs=3 * math.sqrt(60))


def test_seed_determinism():
    a = simulate_paths(SimConfig(n_days=3, seed=(4, 2)))
    b = simulate_paths(SimConfig(n_days=3, seed=(4, 2)))
    assert a[0].prices.tobytes() == b[0].prices.tobytes()
    assert a[1] == b[1]
    c = simulate_paths(SimConfig(n_days=3, seed=(4, 3)))
    assert c[0].prices.tobytes() != a[0].prices.tobytes()


def test_cojumps_visible_in_every_asset():
    panel, log = simulate_paths(SimConfig(n_days=20, p_cojump_pos=0.01, p_cojump_neg=0.01, seed=5))
    r = continuous_log_returns(panel)
    steps = log.steps()
    signs = {}
    for (d, m, s), t in zip(log.events, steps):
        signs.setdefault(int(t), []).append(s)
    for t, s in signs.items():
        if len(s) == 1:  # a single direction fired this minute
            assert np.all(np.sign(r[t]) == s[0])
            assert np.all(np.abs(r[t]) > 0.005)


def test_arithmetic_mode_runs():
    panel, _ = simulate_paths(SimConfig(n_days=2, diffusion="arithmetic", seed=2))
    assert panel.prices.shape == (480, 5)


def test_price_floor_flagged():
    cfg = SimConfig(n_days=2, initial_price=(20, 20), negative_jump=(15, 20), p_cojump_neg=0.05, p_cojump_pos=0, seed=0)
    with pytest.warns(PriceFloorWarning):
        panel, _ = simulate_paths(cfg)
    assert panel.prices.min() >= 1.0


@pytest.mark.parametrize(
    "kwargs",
    [dict(p_cojump_pos=1.2), dict(annual_volatility=(0.3, 0.1)), dict(initial_price=(-1, 5)), dict(n_days=0)],
)
def test_invalid_ranges(kwargs):
    with pytest.raises(InvalidRange):
        SimConfig(**kwargs)


def test_confusion_no_truth_no_peaks():
    c = evaluate_warning([], np.zeros(50, dtype=bool), 9)
    assert c.sensitivity is None and c.specificity == 1.0
    assert c.objective == 0.0


def test_confusion_all_positive_all_covered():
    c = evaluate_warning([0], np.ones(10, dtype=bool), 9)
    assert c.sensitivity == 1.0 and c.specificity is None


def test_confusion_planted_days():
    c = evaluate_warning([3], [5, 50], 9, n_days=250)
    assert (c.tp, c.fp, c.tn, c.fn) == brute_confusion([3], [5, 50], 9, 250) == (1, 9, 239, 1)


def test_confusion_axis_mismatch():
    with pytest.raises(AxisMismatch):
        evaluate_warning([3], CojumpLog((), 20), 9, n_days=30)
    with pytest.raises(AxisMismatch):
        evaluate_warning([40], np.zeros(30, dtype=bool), 9)


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.integers(0, 59), max_size=8),
    st.lists(st.integers(0, 59), max_size=8),
    st.integers(0, 12),
)
def test_confusion_matches_brute_force(peaks, truth, h):
    c = evaluate_warning(peaks, truth, h, n_days=60)
    assert (c.tp, c.fp, c.tn, c.fn) == brute_confusion(peaks, truth, h, 60)
    for rate in (c.sensitivity, c.specificity):
        assert rate is None or 0 <= rate <= 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 99), min_size=1, max_size=6), st.lists(st.integers(0, 99), max_size=6), st.integers(0, 9))
def test_truth_peaks_bound_objective(truth, other, h):
    perfect = evaluate_warning(sorted(set(truth)), truth, h, n_days=100)
    assert perfect.sensitivity == 1.0
    assert perfect.objective <= evaluate_warning(other, truth, 0, n_days=100).objective + 1.0
    assert evaluate_warning(sorted(set(truth)), truth, 0, n_days=100).objective == 0.0


def test_objective_formula():
    c = ConfusionSummary(tp=3, fp=4, tn=12, fn=1)
    assert c.objective == pytest.approx((1 - 12 / 16) ** 2 + (3 / 4 - 1) ** 2)


def test_frequency_grid():
    g = frequency_grid("0.001:0.05:0.001")
    assert len(g) == 50 and g[0] == 0.001 and g[-1] == 0.05
    assert frequency_grid("0.001,0.01") == [0.001, 0.01]
    assert PROFILES["full"]["grid"] == g and PROFILES["full"]["runs"] == 50


@pytest.fixture(scope="module")
def small_calibration():
    cfg = CalibrationConfig(sim=SimConfig(n_days=30), seed=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return calibrate_risk_level([0.001, 0.01, 0.05], 2, cfg), cfg


def test_calibration_structure(small_calibration):
    result, _ = small_calibration
    assert len(result.records) == 3 * 2 * 2
    for kind in ("I", "omega"):
        table = result.table(kind)
        assert table.shape == (3, 2)
        assert np.all(np.isfinite(table))
        assert result.argmin(kind) in (0.001, 0.01, 0.05)
        assert result.optimal_per_run(kind).shape == (2,)


def test_calibration_thread_independent(small_calibration):
    result, cfg = small_calibration
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        again = calibrate_risk_level([0.001, 0.01, 0.05], 2, cfg, threads=2)
    assert again.records == result.records


def test_single_frequency_is_argmin():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = calibrate_risk_level([0.004], 1, CalibrationConfig(sim=SimConfig(n_days=25)))
    assert res.argmin("I") == 0.004


def test_null_simulation_bns_size():
    from mrnews.jumptest import daily_jump_tests
    from mrnews.market_data import WeightVector

    panel, _ = simulate_paths(SimConfig(n_days=400, p_cojump_pos=0, p_cojump_neg=0, seed=9))
    tests = daily_jump_tests(panel, WeightVector.equal(panel.instruments), interval=5, alpha=0.001)
    assert np.mean([t.is_jump for t in tests]) <= 0.01


def test_calibration_csv(small_calibration, tmp_path):
    result, _ = small_calibration
    lines = result.write_csv(tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "indicator,frequency,run,sensitivity,specificity,objective"
    assert len(lines) == 13


def test_peaks_on_simulated_series_are_scored():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        panel, log = simulate_paths(SimConfig(n_days=30, seed=1))
    x = np.random.default_rng(0).normal(size=30)
    c = evaluate_warning(detect_peaks(x), log, 9)
    assert c.n_days == 30
