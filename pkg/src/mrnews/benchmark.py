"""Critical-slowing-down benchmark early warning signals.

Before each crisis: Gaussian-kernel detrending of the daily portfolio price,
rolling variance / lag-1 autocorrelation / low-frequency spectral power of
the residuals, and Kendall's tau trend of a segment of each indicator.  The
trend is checked for robustness over a parameter grid and for significance
against the same statistic over a longer history.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from mrnews.errors import DegenerateSegmentWarning, InsufficientHistory, WindowTooLong

INDICATORS = ("variance", "acf1", "low_freq_power")
HISTORY_DAYS = 1000
LOW_FREQ_SHARE = 0.1
KERNEL_TRUNCATION = 4.0


@dataclass(frozen=True)
class BenchmarkParams:
    kernel_bandwidth: float = 25.0
    rolling_window: int = 150
    lkw: int = 200
    lkend: int = 0
    detrend_window: int = 500

    def __post_init__(self):
        if self.kernel_bandwidth < 0 or self.rolling_window < 2 or self.lkw < 2 or self.lkend < 0:
            raise ValueError(f"invalid benchmark parameters {self}")
        if self.lkw + self.lkend > self.detrend_window - self.rolling_window:
            raise ValueError(
                f"lkw + lkend = {self.lkw + self.lkend} exceeds "
                f"detrend_window - rolling_window = {self.detrend_window - self.rolling_window}"
            )


@dataclass(frozen=True)
class BenchmarkGrid:
    kernel_bandwidth: tuple[float, ...] = (10.0, 25.0, 50.0)
    rolling_window: tuple[int, ...] = (100, 150, 200, 250)
    lkw: tuple[int, ...] = (125, 150, 175, 200, 225, 250)
    lkend: tuple[int, ...] = (0, 10, 20, 30, 40, 50)
    detrend_window: int = 500

    def combinations(self) -> tuple[list[BenchmarkParams], int]:
        """Valid parameter sets plus the number of combinations rejected by the length constraint."""
        valid, rejected = [], 0
        for bw, w, lkw, lkend in itertools.product(self.kernel_bandwidth, self.rolling_window, self.lkw, self.lkend):
            if lkw + lkend > self.detrend_window - w:
                rejected += 1
                continue
            valid.append(BenchmarkParams(bw, w, lkw, lkend, self.detrend_window))
        return valid, rejected


@dataclass(frozen=True)
class Detrended:
    start: int  # index of the first day of the smoothing window
    peak: int  # index of the pre-crisis price maximum (last day of the window)
    prices: np.ndarray
    smooth: np.ndarray
    residuals: np.ndarray


@dataclass(frozen=True)
class RollingIndicators:
    variance: np.ndarray
    acf1: np.ndarray
    low_freq_power: np.ndarray

    def __getitem__(self, name: str) -> np.ndarray:
        return getattr(self, name)


@dataclass(frozen=True)
class TauHistogram:
    params: tuple[BenchmarkParams, ...]
    taus: dict[str, np.ndarray]  # indicator -> tau per parameter set
    rejected: int = 0
    failures: tuple[tuple[BenchmarkParams, str], ...] = ()
    threshold: float = 0.8
    pass_fraction: float = 0.5

    def fraction(self, indicator: str, sign: int) -> float:
        t = self.taus[indicator]
        t = t[np.isfinite(t)]
        if t.size == 0:
            return 0.0
        return float(np.mean(t >= self.threshold) if sign > 0 else np.mean(t <= -self.threshold))

    def direction(self, indicator: str) -> int:
        """+1 / -1 for a robust upward / downward trend, 0 when the indicator fails."""
        up, down = self.fraction(indicator, 1), self.fraction(indicator, -1)
        if up >= self.pass_fraction and up >= down:
            return 1
        if down >= self.pass_fraction:
            return -1
        return 0

    def passes(self, indicator: str) -> bool:
        return self.direction(indicator) != 0

    def histogram(self, indicator: str, bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
        t = self.taus[indicator]
        return np.histogram(t[np.isfinite(t)], bins=bins, range=(-1.0, 1.0))


@dataclass(frozen=True)
class SignificanceResult:
    indicator: str
    tau: float
    p_value: float
    n_segments: int
    direction: int
    level: float = 0.1

    @property
    def significant(self) -> bool:
        return self.p_value < self.level


def gaussian_smooth(x, bandwidth: float) -> np.ndarray:
    """Gaussian kernel smoother truncated at +-4 bandwidths, renormalised at the edges."""
    x = np.asarray(x, dtype=float)
    half = int(math.floor(KERNEL_TRUNCATION * bandwidth)) if bandwidth > 0 else 0
    if half == 0:
        return x.copy()
    offs = np.arange(-half, half + 1)
    kernel = np.exp(-0.5 * (offs / bandwidth) ** 2)
    conv = (lambda v: np.convolve(v, kernel, mode="same")) if x.size >= kernel.size else (lambda v: _direct_conv(v, kernel))
    # smoothing deviations from a reference level makes constant input exact
    ref = x[0] if x.size else 0.0
    return ref + conv(x - ref) / conv(np.ones_like(x))


def _direct_conv(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    half = kernel.size // 2
    out = np.zeros_like(x)
    for i in range(x.size):
        lo, hi = max(0, i - half), min(x.size, i + half + 1)
        out[i] = np.dot(x[lo:hi], kernel[lo - i + half : hi - i + half])
    return out


def _pre_crisis_peak(prices: np.ndarray, crisis: int, search: int) -> int:
    lo = max(0, crisis - search)
    if crisis <= lo:
        raise InsufficientHistory(f"no days before crisis index {crisis}")
    return lo + int(np.argmax(prices[lo:crisis]))


def detrend_gaussian(prices, crisis: int, params: BenchmarkParams | None = None) -> Detrended:
    """Residuals of the ``detrend_window`` days ending at the highest price before ``crisis``.

    The peak is searched over the ``detrend_window`` days preceding the
    crisis index; the smoothing window ends at (and includes) the peak.
    """
    params = params or BenchmarkParams()
    prices = np.asarray(prices, dtype=float)
    D = params.detrend_window
    peak = _pre_crisis_peak(prices, crisis, D)
    start = peak - D + 1
    if start < 0:
        raise InsufficientHistory(f"need {D} days up to the pre-crisis peak at {peak}, have {peak + 1}")
    window = prices[start : peak + 1]
    smooth = gaussian_smooth(window, params.kernel_bandwidth)
    return Detrended(start, peak, window, smooth, window - smooth)


def rolling_indicators(residuals, rolling_window: int) -> RollingIndicators:
    """Sample variance, lag-1 autocorrelation and mean low-frequency periodogram power per window."""
    x = np.asarray(residuals, dtype=float)
    w = int(rolling_window)
    if x.size <= w:
        raise WindowTooLong(f"rolling window {w} needs more than {w} residuals, got {x.size}")
    win = sliding_window_view(x, w)
    centred = win - win.mean(axis=1, keepdims=True)
    ss = np.sum(centred**2, axis=1)
    variance = ss / (w - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        acf1 = np.where(ss > 0, np.sum(centred[:, :-1] * centred[:, 1:], axis=1) / ss, np.nan)
    power = np.abs(np.fft.rfft(centred, axis=1)[:, 1:]) ** 2 / w
    n_low = max(1, math.ceil(LOW_FREQ_SHARE * power.shape[1]))
    return RollingIndicators(variance, acf1, power[:, :n_low].mean(axis=1))


def kendall_tau_trend(segment) -> float:
    """Tau-b between ``segment`` and 1..n (ties in the segment corrected)."""
    y = np.asarray(segment, dtype=float)
    n = y.size
    if n < 2:
        raise ValueError("Kendall trend needs at least two values")
    n0 = n * (n - 1) // 2
    _, counts = np.unique(y, return_counts=True)
    n_ties = int(np.sum(counts * (counts - 1) // 2))
    if n_ties == n0:
        warnings.warn("segment is constant; tau reported as 0", DegenerateSegmentWarning, stacklevel=2)
        return 0.0
    # S = sum_{i<j} sign(y_j - y_i); the index sequence has no ties
    s = int(np.triu(np.sign(y[None, :] - y[:, None]), k=1).sum())
    return s / math.sqrt(n0 * (n0 - n_ties))


def _segment_tau(series: np.ndarray, lkw: int, lkend: int) -> float:
    end = series.size - lkend
    seg = series[end - lkw : end]
    if np.any(~np.isfinite(seg)):
        return float("nan")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSegmentWarning)
        return kendall_tau_trend(seg)


def pre_crisis_taus(prices, crisis: int, params: BenchmarkParams) -> dict[str, float]:
    det = detrend_gaussian(prices, crisis, params)
    ind = rolling_indicators(det.residuals, params.rolling_window)
    return {name: _segment_tau(ind[name], params.lkw, params.lkend) for name in INDICATORS}


def sensitivity_analysis(
    prices,
    crisis: int,
    grid: BenchmarkGrid | Sequence[BenchmarkParams] | None = None,
    *,
    threshold: float = 0.8,
    pass_fraction: float = 0.5,
) -> TauHistogram:
    """Tau of every indicator over a full-factorial parameter grid.

    Combinations lacking history are recorded in ``failures`` and skipped.
    """
    grid = grid or BenchmarkGrid()
    if isinstance(grid, BenchmarkGrid):
        combos, rejected = grid.combinations()
    else:
        combos, rejected = list(grid), 0
    if not combos:
        raise ValueError("parameter grid has no valid combination")
    kept, failures = [], []
    taus = {name: [] for name in INDICATORS}
    for params in combos:
        try:
            t = pre_crisis_taus(prices, crisis, params)
        except (InsufficientHistory, WindowTooLong) as exc:
            failures.append((params, str(exc)))
            continue
        kept.append(params)
        for name in INDICATORS:
            taus[name].append(t[name])
    return TauHistogram(
        tuple(kept),
        {k: np.asarray(v, dtype=float) for k, v in taus.items()},
        rejected,
        tuple(failures),
        threshold,
        pass_fraction,
    )


def sliding_kendall_taus(series, lkw: int) -> np.ndarray:
    """Tau-b trend of every stride-1 window of length ``lkw``, updated incrementally.

    S = sum_{i<j} sign(y_j - y_i) and the tie count are carried from one
    window to the next, so each step costs O(lkw).  Windows holding a
    non-finite value give NaN; constant windows give 0.
    """
    y = np.asarray(series, dtype=float)
    n_win = y.size - lkw + 1
    if lkw < 2 or n_win < 1:
        raise ValueError("series shorter than the segment length")
    n0 = lkw * (lkw - 1) // 2
    finite = np.isfinite(y)
    bad = np.convolve(~finite, np.ones(lkw, dtype=int), mode="valid") > 0
    z = np.where(finite, y, 0.0)
    out = np.empty(n_win)
    first = z[:lkw]
    s = int(np.triu(np.sign(first[None, :] - first[:, None]), k=1).sum())
    counts: dict[float, int] = {}
    for v in first.tolist():
        counts[v] = counts.get(v, 0) + 1
    ties = sum(c * (c - 1) // 2 for c in counts.values())
    for i in range(n_win):
        if i:
            old, new = z[i - 1], z[i + lkw - 1]
            # drop `old` (first of the previous window), then append `new`
            s -= int(np.sign(z[i : i + lkw - 1] - old).sum())
            s += int(np.sign(new - z[i : i + lkw - 1]).sum())
            c = counts[old]
            ties -= c - 1
            if c == 1:
                del counts[old]
            else:
                counts[old] = c - 1
            c = counts.get(new, 0)
            ties += c
            counts[new] = c + 1
        if bad[i]:
            out[i] = np.nan
        elif ties == n0:
            out[i] = 0.0
        else:
            out[i] = s / math.sqrt(n0 * (n0 - ties))
    return out


def historical_taus(prices, crisis: int, params: BenchmarkParams, history: int = HISTORY_DAYS) -> dict[str, np.ndarray]:
    """Tau of every stride-1 length-``lkw`` segment over the ``history`` days ending at the pre-crisis peak.

    The last element of each array is the pre-crisis segment (ending
    ``lkend`` days before the peak).
    """
    prices = np.asarray(prices, dtype=float)
    peak = _pre_crisis_peak(prices, crisis, params.detrend_window)
    start = peak - history + 1
    if start < 0:
        raise InsufficientHistory(f"need {history} days up to the pre-crisis peak at {peak}, have {peak + 1}")
    window = prices[start : peak + 1]
    residuals = window - gaussian_smooth(window, params.kernel_bandwidth)
    ind = rolling_indicators(residuals, params.rolling_window)
    out = {}
    for name in INDICATORS:
        series = ind[name]
        usable = series[: series.size - params.lkend]
        if usable.size < params.lkw:
            raise InsufficientHistory("history too short for a single segment")
        out[name] = sliding_kendall_taus(usable, params.lkw)
    return out


def rank_p_value(pre: float, pool: Iterable[float], direction: int, include_self: bool = False) -> float:
    """Fraction of ``pool`` at least as extreme as ``pre`` in ``direction`` (+1: >=, -1: <=)."""
    pool = np.asarray(list(pool), dtype=float)
    pool = pool[np.isfinite(pool)]
    if include_self:
        pool = np.append(pool, pre)
    if pool.size == 0:
        return float("nan")
    hits = pool >= pre if direction >= 0 else pool <= pre
    return float(np.mean(hits))


def significance_test(
    prices,
    crisis: int,
    params: BenchmarkParams | None = None,
    *,
    history: int = HISTORY_DAYS,
    level: float = 0.1,
) -> dict[str, SignificanceResult]:
    """One-sided rank p-value of the pre-crisis tau against all historical segment taus.

    The pool contains every segment of the history window, the pre-crisis
    segment included; the tail follows the sign of the pre-crisis tau.
    """
    params = params or BenchmarkParams()
    pools = historical_taus(prices, crisis, params, history)
    out = {}
    for name, pool in pools.items():
        pre = float(pool[-1])
        direction = 1 if not np.isfinite(pre) or pre >= 0 else -1
        p = rank_p_value(pre, pool, direction) if np.isfinite(pre) else float("nan")
        out[name] = SignificanceResult(name, pre, p, int(np.isfinite(pool).sum()), direction, level)
    return out

