"""Daily MRN indicator series, peak detection and risk intervals."""

from __future__ import annotations

import hashlib
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numpy as np

from mrnews.errors import EmptyLayersWarning, MrnError, SeriesTooShort, ShortSegmentWarning
from mrnews.market_data import DayWindow, PricePanel, return_windows
from mrnews.mrn import average_edge_overlap, average_mutual_information, build_mrn
from mrnews.recurrence import EmbeddingConfig, ThresholdPolicy, nearest_rank

KINDS = ("I", "omega")
MIN_SEGMENT = 20


@dataclass(frozen=True)
class IndicatorConfig:
    embedding: EmbeddingConfig = EmbeddingConfig()
    threshold: ThresholdPolicy = ThresholdPolicy()
    # returns: intraday 1-minute returns; continuous-returns: anchored returns
    # crossing day boundaries (simulated paths); prices: raw price levels
    source: Literal["returns", "continuous-returns", "prices"] = "returns"
    mi_normalization: Literal["pairs", "as-printed"] = "pairs"
    overlap_normalization: Literal["pairwise-2", "as-printed"] = "pairwise-2"
    max_degenerate_frac: float = 0.5

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class IndicatorSeries:
    dates: np.ndarray
    values: np.ndarray  # NaN where gap is True
    kind: str
    fingerprint: str = ""
    gap: np.ndarray | None = None
    notes: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        gap = np.isnan(values) if self.gap is None else np.asarray(self.gap, dtype=bool)
        values = np.where(gap, np.nan, values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gap", gap)
        object.__setattr__(self, "dates", np.asarray(self.dates))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class PeakSet:
    indices: np.ndarray
    thresholds: np.ndarray  # delta used for each peak
    left_jumps: np.ndarray
    right_jumps: np.ndarray
    length: int
    segments: tuple[tuple[int, int, float], ...] = ()  # (start, stop, delta)
    dates: np.ndarray | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return self.indices.size

    @property
    def delta(self) -> float:
        """Delta of the single segment (NaN when the series was split)."""
        return self.segments[0][2] if len(self.segments) == 1 else float("nan")


@dataclass(frozen=True)
class IntervalSet:
    intervals: tuple[tuple[int, int], ...]  # inclusive day-index ranges
    horizon: int
    length: int

    def mask(self) -> np.ndarray:
        out = np.zeros(self.length, dtype=bool)
        for a, b in self.intervals:
            out[a : b + 1] = True
        return out

    def as_dates(self, dates: Sequence) -> list[tuple]:
        return [(dates[a], dates[b]) for a, b in self.intervals]


def day_windows(panel: PricePanel, source: str = "returns") -> list[DayWindow]:
    if source == "prices":
        return panel.day_windows()
    if source == "returns":
        return return_windows(panel)
    if source == "continuous-returns":
        return return_windows(panel, continuous=True)
    raise ValueError(f"unknown indicator source {source!r}")


def day_indicators(window, config: IndicatorConfig, kinds: Sequence[str] = KINDS) -> tuple[dict, str | None]:
    """Indicator values for one window; ``({}, reason)`` when the day is a gap."""
    try:
        mrn = build_mrn(window, config.embedding, config.threshold)
    except MrnError as exc:
        return {}, f"{type(exc).__name__}: {exc}"
    if np.mean(mrn.degenerate) > config.max_degenerate_frac:
        return {}, f"{sum(mrn.degenerate)} of {mrn.n_layers} layers degenerate"
    out = {}
    if "I" in kinds:
        out["I"] = average_mutual_information(mrn, config.mi_normalization)
    if "omega" in kinds:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyLayersWarning)
            out["omega"] = average_edge_overlap(mrn, config.overlap_normalization)
    return out, None


def _day_job(args):
    window, config, kinds = args
    return day_indicators(window, config, kinds)


def indicator_series(
    panel: PricePanel,
    config: IndicatorConfig | None = None,
    kinds: Sequence[str] = KINDS,
    *,
    threads: int = 1,
) -> dict[str, IndicatorSeries]:
    """Build one MRN per trading day and return the requested daily indicator series.

    Days whose MRN cannot be built, or where more than half of the layers are
    degenerate, become gaps; the reason is kept in ``series.notes``.
    """
    config = config or IndicatorConfig()
    if len(panel.instruments) < 2:
        raise ValueError("indicator series need at least two instruments")
    for k in kinds:
        if k not in KINDS:
            raise ValueError(f"unknown indicator {k!r}")
    windows = day_windows(panel, config.source)
    jobs = [(w, config, tuple(kinds)) for w in windows]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_day_job, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        results = [_day_job(j) for j in jobs]
    dates = panel.dates
    fp = config.fingerprint()
    notes = tuple((i, reason) for i, (_, reason) in enumerate(results) if reason)
    out = {}
    for k in kinds:
        vals = np.array([r.get(k, np.nan) for r, _ in results], dtype=float)
        out[k] = IndicatorSeries(dates, vals, k, fp, ~np.isfinite(vals), notes)
    return out


def _segments(gap: np.ndarray) -> list[tuple[int, int]]:
    segs, start = [], None
    for i, g in enumerate(gap):
        if not g and start is None:
            start = i
        elif g and start is not None:
            segs.append((start, i))
            start = None
    if start is not None:
        segs.append((start, gap.size))
    return segs


def detect_peaks(series, percentile: float = 95.0) -> PeakSet:
    """Peaks p with (x_p - x_{p-1})(x_p - x_{p+1}) > 0 and both jumps above delta.

    Delta is the nearest-rank ``percentile`` of the absolute adjacent
    differences, computed per gap-free segment.  Segments shorter than 20
    days fall back to the maximum difference (so they cannot produce peaks)
    and raise a :class:`ShortSegmentWarning`.
    """
    if isinstance(series, IndicatorSeries):
        x, gap, dates = series.values, series.gap, series.dates
    else:
        x = np.asarray(series, dtype=float)
        gap, dates = ~np.isfinite(x), None
    T = x.size
    if T < 3:
        raise SeriesTooShort(f"peak detection needs at least 3 values, got {T}")
    idx, thr, left, right, segs = [], [], [], [], []
    for a, b in _segments(gap):
        seg = x[a:b]
        if seg.size < 3:
            continue
        diffs = np.abs(np.diff(seg))
        if seg.size < MIN_SEGMENT:
            warnings.warn(
                f"segment [{a}, {b}) has {seg.size} values; using the maximum difference as delta",
                ShortSegmentWarning,
                stacklevel=2,
            )
            delta = float(diffs.max())
        else:
            delta = nearest_rank(diffs, percentile / 100.0)
        segs.append((a, b, delta))
        up = seg[1:-1] - seg[:-2]
        down = seg[1:-1] - seg[2:]
        hit = (up * down > 0) & (up > delta) & (down > delta)
        for j in np.flatnonzero(hit):
            idx.append(a + j + 1)
            thr.append(delta)
            left.append(up[j])
            right.append(down[j])
    return PeakSet(
        np.array(idx, dtype=int),
        np.array(thr, dtype=float),
        np.array(left, dtype=float),
        np.array(right, dtype=float),
        T,
        tuple(segs),
        dates,
    )


def risk_intervals(peaks: PeakSet | Sequence[int], horizon: int = 9, length: int | None = None) -> IntervalSet:
    """Expand each peak day p into [p, p + horizon], merge overlaps, truncate at the series end."""
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    if isinstance(peaks, PeakSet):
        starts = peaks.indices.tolist()
        length = peaks.length if length is None else length
    else:
        starts = [int(p) for p in peaks]
        if length is None:
            length = (max(starts) + horizon + 1) if starts else 0
    merged: list[list[int]] = []
    for p in sorted(starts):
        a, b = p, min(p + horizon, length - 1)
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return IntervalSet(tuple((a, b) for a, b in merged), horizon, length)


__all__ = [
    "IndicatorConfig",
    "IndicatorSeries",
    "IntervalSet",
    "PeakSet",
    "day_indicators",
    "day_windows",
    "detect_peaks",
    "indicator_series",
    "risk_intervals",
]
