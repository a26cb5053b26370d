"""Monte Carlo co-jump simulator and ROC-style calibration of the co-jump frequency.

Each asset follows a discretised diffusion with one-minute steps.  Co-jumps
arrive as one Bernoulli draw per minute and direction shared by all assets;
the jump size is drawn independently per asset and added in currency units.
Calibration scores MRN indicator peaks against the planted co-jump days and
looks for the frequency minimising (1 - specificity)^2 + (sensitivity - 1)^2.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from mrnews._io import write_rows
from mrnews.errors import AxisMismatch, InvalidRange, PriceFloorWarning, SeriesTooShort
from mrnews.indicators import IndicatorConfig, PeakSet, detect_peaks, indicator_series, risk_intervals
from mrnews.jumptest import daily_jump_tests
from mrnews.market_data import PricePanel, WeightVector

Range = tuple[float, float]


@dataclass(frozen=True)
class SimConfig:
    n_assets: int = 5
    n_days: int = 250
    minutes_per_day: int = 240
    annual_return: Range = (0.1, 0.2)
    annual_volatility: Range = (0.1, 0.3)
    initial_price: Range = (500.0, 1000.0)
    p_cojump_pos: float = 0.001  # per minute
    p_cojump_neg: float = 0.001
    positive_jump: Range = (10.0, 15.0)
    negative_jump: Range = (15.0, 20.0)
    diffusion: Literal["geometric", "arithmetic"] = "geometric"
    price_floor: float = 1.0
    seed: int | tuple[int, ...] | None = 0
    start_date: str = "2021-01-04"
    days_per_year: int = 250

    def __post_init__(self):
        if self.days_per_year < 1:
            raise InvalidRange("days_per_year must be >= 1")
        if self.n_assets < 1 or self.n_days < 1 or self.minutes_per_day < 2:
            raise InvalidRange("n_assets, n_days must be >= 1 and minutes_per_day >= 2")
        for name in ("annual_return", "annual_volatility", "initial_price", "positive_jump", "negative_jump"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise InvalidRange(f"{name} range ({lo}, {hi}) is invalid")
        if self.annual_volatility[0] < 0 or self.initial_price[0] <= 0:
            raise InvalidRange("volatility must be >= 0 and initial prices > 0")
        if self.positive_jump[0] < 0 or self.negative_jump[0] < 0:
            raise InvalidRange("jump sizes are magnitudes and must be >= 0")
        for p in (self.p_cojump_pos, self.p_cojump_neg):
            if not 0 <= p < 1:
                raise InvalidRange(f"co-jump probability {p} outside [0, 1)")
        if self.diffusion not in ("geometric", "arithmetic"):
            raise InvalidRange(f"unknown diffusion {self.diffusion!r}")

    @property
    def n_steps(self) -> int:
        return self.n_days * self.minutes_per_day

    @property
    def dt(self) -> float:
        """One minute as a fraction of a trading year."""
        return 1.0 / (self.days_per_year * self.minutes_per_day)


@dataclass(frozen=True)
class CojumpLog:
    events: tuple[tuple[int, int, int], ...]  # (day, minute within day, +1/-1)
    n_days: int
    minutes_per_day: int = 240

    @property
    def days(self) -> list[int]:
        return sorted({d for d, _, _ in self.events})

    def mask(self) -> np.ndarray:
        out = np.zeros(self.n_days, dtype=bool)
        out[self.days] = True
        return out

    def count(self, direction: int | None = None) -> int:
        return sum(1 for e in self.events if direction is None or e[2] == direction)

    def steps(self) -> np.ndarray:
        """Global one-minute return index of every event."""
        return np.array([d * self.minutes_per_day + m for d, m, _ in self.events], dtype=int)

    def write_csv(self, path: str | Path) -> Path:
        return write_rows(path, ["day", "minute", "direction"], self.events)


def session_minutes(minutes_per_day: int) -> np.ndarray:
    """Minute offsets from midnight: 09:31-11:30 and 13:01-15:00 for a 240-minute day."""
    if minutes_per_day == 240:
        return np.concatenate([np.arange(9 * 60 + 31, 11 * 60 + 31), np.arange(13 * 60 + 1, 15 * 60 + 1)])
    return 9 * 60 + 31 + np.arange(minutes_per_day)


def trading_timestamps(n_days: int, minutes_per_day: int, start: str = "2021-01-04") -> np.ndarray:
    days = np.busday_offset(np.datetime64(start, "D"), np.arange(n_days), roll="forward")
    offs = session_minutes(minutes_per_day).astype("timedelta64[m]")
    return (days.astype("datetime64[m]")[:, None] + offs[None, :]).reshape(-1)


def _propagate(p0, growth, shift, jumps, floor, geometric):
    """P_t = P_{t-1} * g_t + s_t + J_t (geometric) or P_{t-1} + s_t + J_t (arithmetic), floored."""
    T, n = shift.shape
    out = np.empty((T, n))
    cut = np.concatenate([np.flatnonzero(np.any(jumps != 0, axis=1)) + 1, [T]])
    prev = np.asarray(p0, float)
    start = 0
    floored = False
    for stop in np.unique(cut):
        if stop <= start:
            continue
        if geometric:
            seg = prev * np.cumprod(growth[start:stop], axis=0)
        else:
            seg = prev + np.cumsum(shift[start:stop], axis=0)
        seg[-1] += jumps[stop - 1]
        if np.any(seg < floor):
            floored = True
            p = prev.copy()
            for t in range(start, stop):
                p = p * growth[t] if geometric else p + shift[t]
                p = np.maximum(p + jumps[t], floor)
                seg[t - start] = p
        out[start:stop] = seg
        prev = seg[-1]
        start = stop
    return out, floored


def simulate_paths(config: SimConfig | None = None) -> tuple[PricePanel, CojumpLog]:
    """Simulate ``n_days * minutes_per_day`` one-minute steps for every asset.

    The returned panel carries the initial prices as its anchor, so
    :func:`~mrnews.market_data.continuous_log_returns` yields exactly one
    return per simulated minute (60,000 for 250 days of 240 minutes).
    """
    config = config or SimConfig()
    rng = np.random.default_rng(config.seed)
    n, T, dt = config.n_assets, config.n_steps, config.dt
    mu = rng.uniform(*config.annual_return, size=n)
    sigma = rng.uniform(*config.annual_volatility, size=n)
    p0 = rng.uniform(*config.initial_price, size=n)
    z = rng.standard_normal((T, n))
    fire_pos = rng.random(T) < config.p_cojump_pos
    fire_neg = rng.random(T) < config.p_cojump_neg
    size_pos = rng.uniform(*config.positive_jump, size=(int(fire_pos.sum()), n))
    size_neg = rng.uniform(*config.negative_jump, size=(int(fire_neg.sum()), n))

    jumps = np.zeros((T, n))
    jumps[fire_pos] += size_pos
    jumps[fire_neg] -= size_neg
    geometric = config.diffusion == "geometric"
    if geometric:
        growth = 1.0 + mu * dt + sigma * math.sqrt(dt) * z
        shift = np.zeros((T, n))
    else:
        growth = np.ones((T, n))
        shift = mu * dt + sigma * math.sqrt(dt) * z
    prices, floored = _propagate(p0, growth, shift, jumps, config.price_floor, geometric)
    if floored:
        warnings.warn(f"prices floored at {config.price_floor}", PriceFloorWarning, stacklevel=2)

    L = config.minutes_per_day
    events = sorted(
        [(int(t // L), int(t % L), 1) for t in np.flatnonzero(fire_pos)]
        + [(int(t // L), int(t % L), -1) for t in np.flatnonzero(fire_neg)]
    )
    panel = PricePanel(
        timestamps=trading_timestamps(config.n_days, L, config.start_date),
        instruments=tuple(f"A{k + 1}" for k in range(n)),
        prices=prices,
        window_len=L,
        anchor=p0,
    )
    return panel, CojumpLog(tuple(events), config.n_days, L)


# --- scoring ------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionSummary:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n_days(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def sensitivity(self) -> float | None:
        pos = self.tp + self.fn
        return self.tp / pos if pos else None

    @property
    def specificity(self) -> float | None:
        neg = self.tn + self.fp
        return self.tn / neg if neg else None

    @property
    def objective(self) -> float:
        """(1 - specificity)^2 + (sensitivity - 1)^2; an undefined rate contributes no error."""
        sens = 1.0 if self.sensitivity is None else self.sensitivity
        spec = 1.0 if self.specificity is None else self.specificity
        return (1.0 - spec) ** 2 + (sens - 1.0) ** 2


def _truth_mask(truth, n_days: int | None) -> np.ndarray:
    if isinstance(truth, CojumpLog):
        if n_days is not None and truth.n_days != n_days:
            raise AxisMismatch(f"truth covers {truth.n_days} days, peaks {n_days}")
        return truth.mask()
    arr = np.asarray(list(truth) if not isinstance(truth, np.ndarray) else truth)
    if arr.dtype == bool:
        if n_days is not None and arr.size != n_days:
            raise AxisMismatch(f"truth mask has {arr.size} days, peaks {n_days}")
        return arr
    if n_days is None:
        raise ValueError("n_days is required when truth is given as day indices")
    if arr.size and (arr.min() < 0 or arr.max() >= n_days):
        raise AxisMismatch("truth day index outside the day axis")
    mask = np.zeros(n_days, dtype=bool)
    mask[arr.astype(int)] = True
    return mask


def evaluate_warning(
    peaks: PeakSet | Sequence[int],
    truth,
    horizon: int = 9,
    n_days: int | None = None,
) -> ConfusionSummary:
    """Day-wise confusion counts: predicted positive inside any risk interval, actual positive on co-jump days."""
    if isinstance(peaks, PeakSet):
        if n_days is not None and n_days != peaks.length:
            raise AxisMismatch(f"peak series has {peaks.length} days, expected {n_days}")
        n_days = peaks.length
        indices = peaks.indices
    else:
        indices = np.asarray(list(peaks), dtype=int)
        if n_days is None:
            n_days = truth.n_days if isinstance(truth, CojumpLog) else len(truth)
    if indices.size and (indices.min() < 0 or indices.max() >= n_days):
        raise AxisMismatch("peak index outside the day axis")
    actual = _truth_mask(truth, n_days)
    predicted = risk_intervals(indices.tolist(), horizon, n_days).mask()
    return ConfusionSummary(
        tp=int(np.sum(predicted & actual)),
        fp=int(np.sum(predicted & ~actual)),
        tn=int(np.sum(~predicted & ~actual)),
        fn=int(np.sum(~predicted & actual)),
    )


# --- calibration ----------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationConfig:
    sim: SimConfig = SimConfig()
    indicators: IndicatorConfig = IndicatorConfig(source="continuous-returns")
    kinds: tuple[str, ...] = ("I", "omega")
    horizon: int = 9
    scoring: Literal["truth", "bns"] = "truth"
    bns_alpha: float | None = None  # None: use the co-jump frequency itself
    bns_interval: int = 5
    seed: int = 0


@dataclass(frozen=True)
class CalibrationRecord:
    kind: str
    frequency: float
    run: int
    confusion: ConfusionSummary
    n_peaks: int

    @property
    def objective(self) -> float:
        return self.confusion.objective


@dataclass(frozen=True)
class CalibrationResult:
    frequencies: tuple[float, ...]
    runs: int
    kinds: tuple[str, ...]
    records: tuple[CalibrationRecord, ...] = field(repr=False)

    def table(self, kind: str) -> np.ndarray:
        """Objective matrix [frequency x run]."""
        out = np.full((len(self.frequencies), self.runs), np.nan)
        fi = {f: i for i, f in enumerate(self.frequencies)}
        for r in self.records:
            if r.kind == kind:
                out[fi[r.frequency], r.run] = r.objective
        return out

    def mean_objective(self, kind: str) -> np.ndarray:
        return self.table(kind).mean(axis=1)

    def argmin(self, kind: str) -> float:
        return self.frequencies[int(np.argmin(self.mean_objective(kind)))]

    def optimal_per_run(self, kind: str) -> np.ndarray:
        """Distribution of the optimal frequency across runs."""
        idx = np.argmin(self.table(kind), axis=0)
        return np.asarray(self.frequencies)[idx]

    def write_csv(self, path: str | Path) -> Path:
        rows = sorted(
            self.records, key=lambda r: (self.kinds.index(r.kind), self.frequencies.index(r.frequency), r.run)
        )
        return write_rows(
            path,
            ["indicator", "frequency", "run", "sensitivity", "specificity", "objective"],
            ((r.kind, r.frequency, r.run, r.confusion.sensitivity, r.confusion.specificity, r.objective) for r in rows),
        )


def _calibration_job(args) -> list[CalibrationRecord]:
    fi, ri, frequency, config = args
    sim = replace(config.sim, p_cojump_pos=frequency, p_cojump_neg=frequency, seed=(config.seed, fi, ri))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PriceFloorWarning)
        panel, log = simulate_paths(sim)
    if config.scoring == "truth":
        truth = log.mask()
    else:
        alpha = config.bns_alpha if config.bns_alpha is not None else frequency
        tests = daily_jump_tests(panel, WeightVector.equal(panel.instruments), interval=config.bns_interval, alpha=alpha)
        truth = np.array([t.is_jump for t in tests])
    series = indicator_series(panel, config.indicators, config.kinds)
    out = []
    for kind in config.kinds:
        try:
            peaks = detect_peaks(series[kind])
            indices = peaks.indices
        except SeriesTooShort:
            indices = np.array([], dtype=int)
        conf = evaluate_warning(indices.tolist(), truth, config.horizon, panel.n_days)
        out.append(CalibrationRecord(kind, frequency, ri, conf, int(indices.size)))
    return out


def calibrate_risk_level(
    frequencies: Iterable[float],
    runs: int = 50,
    config: CalibrationConfig | None = None,
    *,
    threads: int = 1,
) -> CalibrationResult:
    """Score indicator peaks against planted co-jumps over a frequency grid and repeated runs.

    Every (frequency, run) job seeds its own generator from
    ``(config.seed, frequency index, run index)``, so results do not depend
    on ``threads``.
    """
    config = config or CalibrationConfig()
    freqs = tuple(float(f) for f in frequencies)
    if not freqs:
        raise ValueError("frequency grid is empty")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    jobs = [(fi, ri, f, config) for fi, f in enumerate(freqs) for ri in range(runs)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(_calibration_job, jobs))
    else:
        batches = [_calibration_job(j) for j in jobs]
    records = tuple(r for batch in batches for r in batch)
    return CalibrationResult(freqs, runs, tuple(config.kinds), records)


def frequency_grid(spec: str) -> list[float]:
    """Parse ``start:stop:step`` (inclusive) or a comma-separated list."""
    if ":" in spec:
        start, stop, step = (float(x) for x in spec.split(":"))
        n = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    return [float(x) for x in spec.split(",") if x.strip()]


PROFILES = {
    # Laptop-scale harness: completes in well under a minute.
    "desk": dict(grid=[0.001, 0.005, 0.01, 0.05], runs=5, n_days=50),
    # Study layout: 50 frequencies x 50 runs x 250 days; hours of compute.
    "full": dict(grid=frequency_grid("0.001:0.05:0.001"), runs=50, n_days=250),
}
