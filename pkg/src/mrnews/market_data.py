"""High-frequency price panels: loading, cleaning, portfolio construction and log returns.

A :class:`PricePanel` stores minute prices for several instruments, with every
trading day contributing exactly ``window_len`` rows.  A "day" is the date
component of the timestamp; no exchange calendar is consulted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from mrnews._io import write_rows
from mrnews.errors import (
    EmptyPanel,
    IntervalNotDivisor,
    MissingColumn,
    NonPositivePrice,
    SessionGridError,
    WeightMismatch,
)

DEFAULT_WINDOW = 240
PORTFOLIO = "PORTFOLIO"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CleaningReport:
    rejected_rows: tuple[int, ...] = ()
    off_session_rows: tuple[int, ...] = ()
    duplicate_rows: tuple[int, ...] = ()
    dropped_days: tuple[tuple[str, float], ...] = ()
    filled_cells: int = 0


@dataclass(frozen=True)
class DayWindow:
    date: np.datetime64
    timestamps: np.ndarray
    instruments: tuple[str, ...]
    values: np.ndarray  # [time x instrument]

    def __len__(self) -> int:
        return self.values.shape[0]

    def column(self, instrument: str) -> np.ndarray:
        return self.values[:, self.instruments.index(instrument)]


@dataclass(frozen=True)
class ReturnSeries:
    """Intraday log returns for one day; ``timestamps`` mark the end of each return."""

    date: np.datetime64
    timestamps: np.ndarray
    instruments: tuple[str, ...]
    values: np.ndarray  # [return x instrument]
    sampling_interval: int

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def vector(self) -> np.ndarray:
        if self.values.shape[1] != 1:
            raise ValueError("vector is only defined for single-instrument returns")
        return self.values[:, 0]


@dataclass(frozen=True)
class PricePanel:
    timestamps: np.ndarray  # datetime64[m], strictly increasing
    instruments: tuple[str, ...]
    prices: np.ndarray  # [time x instrument], all > 0
    window_len: int = DEFAULT_WINDOW
    # Prices at the instant before the first row (simulated paths carry one).
    anchor: np.ndarray | None = None
    cleaning: CleaningReport | None = field(default=None, compare=False)

    def __post_init__(self):
        ts = np.asarray(self.timestamps).astype("datetime64[m]")
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim == 1:
            prices = prices[:, None]
        object.__setattr__(self, "instruments", tuple(str(i) for i in self.instruments))
        if prices.shape != (ts.size, len(self.instruments)):
            raise ValueError(
                f"prices shape {prices.shape} does not match "
                f"{ts.size} timestamps x {len(self.instruments)} instruments"
            )
        if ts.size == 0:
            raise EmptyPanel("panel has no rows")
        if np.any(np.diff(ts) <= np.timedelta64(0, "m")):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(prices)):
            raise ValueError("panel contains missing or non-finite prices")
        bad = np.argwhere(prices <= 0)
        if bad.size:
            r, c = bad[0]
            raise NonPositivePrice(int(r), self.instruments[c], float(prices[r, c]))
        days, counts = np.unique(ts.astype("datetime64[D]"), return_counts=True)
        wrong = counts != self.window_len
        if np.any(wrong):
            raise ValueError(
                f"day {days[wrong][0]} has {counts[wrong][0]} rows, expected {self.window_len}"
            )
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "prices", _frozen(prices))
        if self.anchor is not None:
            anchor = np.asarray(self.anchor, dtype=float).reshape(-1)
            if anchor.size != len(self.instruments):
                raise ValueError("anchor must hold one price per instrument")
            object.__setattr__(self, "anchor", _frozen(anchor))

    @property
    def n_days(self) -> int:
        return self.prices.shape[0] // self.window_len

    @property
    def dates(self) -> np.ndarray:
        return self.timestamps[:: self.window_len].astype("datetime64[D]")

    def day(self, index: int) -> DayWindow:
        sl = slice(index * self.window_len, (index + 1) * self.window_len)
        return DayWindow(
            date=self.timestamps[sl.start].astype("datetime64[D]"),
            timestamps=self.timestamps[sl],
            instruments=self.instruments,
            values=self.prices[sl],
        )

    def day_windows(self) -> list[DayWindow]:
        return [self.day(i) for i in range(self.n_days)]

    @classmethod
    def from_days(cls, days: Sequence[DayWindow], window_len: int | None = None) -> "PricePanel":
        if not days:
            raise EmptyPanel("no day windows given")
        instruments = days[0].instruments
        if any(d.instruments != instruments for d in days):
            raise ValueError("day windows disagree on instruments")
        return cls(
            timestamps=np.concatenate([d.timestamps for d in days]),
            instruments=instruments,
            prices=np.concatenate([d.values for d in days]),
            window_len=window_len or len(days[0]),
        )

    def select(self, instruments: Iterable[str]) -> "PricePanel":
        instruments = tuple(instruments)
        idx = [self.instruments.index(i) for i in instruments]
        return PricePanel(
            self.timestamps,
            instruments,
            self.prices[:, idx],
            self.window_len,
            None if self.anchor is None else self.anchor[idx],
        )

    def subset_days(self, start: int, stop: int) -> "PricePanel":
        sl = slice(start * self.window_len, stop * self.window_len)
        return PricePanel(self.timestamps[sl], self.instruments, self.prices[sl], self.window_len)


@dataclass(frozen=True)
class WeightVector:
    weights: Mapping[str, float]

    def __post_init__(self):
        w = {str(k): float(v) for k, v in dict(self.weights).items()}
        if not w:
            raise ValueError("empty weight vector")
        if any(v < 0 or not np.isfinite(v) for v in w.values()):
            raise ValueError("weights must be finite and non-negative")
        if abs(sum(w.values()) - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {sum(w.values())!r}, expected 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, raw: Mapping[str, float]) -> "WeightVector":
        total = float(sum(raw.values()))
        if total <= 0:
            raise ValueError("raw weights must have a positive sum")
        return cls({k: float(v) / total for k, v in raw.items()})

    @classmethod
    def equal(cls, instruments: Iterable[str]) -> "WeightVector":
        instruments = list(instruments)
        return cls({i: 1.0 / len(instruments) for i in instruments})

    def aligned(self, instruments: Sequence[str]) -> np.ndarray:
        if set(instruments) != set(self.weights):
            missing = sorted(set(instruments) - set(self.weights))
            extra = sorted(set(self.weights) - set(instruments))
            raise WeightMismatch(f"weights missing {missing}, unknown {extra}")
        return np.array([self.weights[i] for i in instruments])


def _infer_session(times_of_day: pd.Series, day_keys: pd.Series, window_len: int) -> np.ndarray:
    n_days = day_keys.nunique()
    counts = times_of_day.groupby(times_of_day).size()
    session = np.sort(counts[counts * 2 >= n_days].index.to_numpy())
    if session.size != window_len:
        raise SessionGridError(
            f"inferred {session.size} intraday minutes, expected {window_len}; pass session= explicitly"
        )
    return session


def _to_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return np.nan


def _parse_prices(column: pd.Series) -> np.ndarray:
    # numpy's string conversion is correctly rounded, unlike pandas' fast parser;
    # blanks and junk fall back to an element-wise parse that yields NaN
    text = column.str.strip().to_numpy()
    try:
        return text.astype(float)
    except ValueError:
        return np.array([_to_float(t) for t in text])


def load_price_panel(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    *,
    window_len: int = DEFAULT_WINDOW,
    max_missing_frac: float = 0.05,
    session: Sequence[str] | None = None,
) -> PricePanel:
    """Read a ``timestamp,<inst1>,<inst2>,...`` CSV into a cleaned :class:`PricePanel`.

    ``schema`` maps canonical names to file columns: the key ``"timestamp"``
    names the time column and every other key is an instrument id mapped to
    its column.  Without a schema the ``timestamp`` column is used and all
    remaining columns are instruments.

    Rows with unparseable timestamps, duplicate timestamps or times outside
    the intraday session grid are rejected.  Missing cells inside a day are
    forward-filled (leading gaps back-filled); days whose missing-cell
    fraction exceeds ``max_missing_frac`` are dropped.  Everything removed is
    listed in ``panel.cleaning``.

    ``session`` optionally fixes the intraday grid as ``"HH:MM"`` strings;
    otherwise it is the set of minutes present on at least half the days.
    """
    path = Path(path)
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    schema = dict(schema or {})
    ts_col = schema.pop("timestamp", "timestamp")
    if ts_col not in raw.columns:
        raise MissingColumn(f"timestamp column {ts_col!r} not found in {path}")
    if schema:
        columns = schema
    else:
        columns = {c: c for c in raw.columns if c != ts_col}
    if not columns:
        raise MissingColumn(f"no instrument columns in {path}")
    for inst, col in columns.items():
        if col not in raw.columns:
            raise MissingColumn(f"instrument column {col!r} ({inst}) not found in {path}")

    line_no = np.arange(len(raw)) + 2  # header is line 1
    stamps = pd.to_datetime(raw[ts_col].str.strip(), errors="coerce", format="ISO8601")
    bad_ts = stamps.isna().to_numpy()
    values = np.column_stack(
        [_parse_prices(raw[col]) for col in columns.values()]
    ) if len(raw) else np.empty((0, len(columns)))

    nonpos = np.argwhere(~bad_ts[:, None] & (values <= 0))
    if nonpos.size:
        r, c = nonpos[0]
        raise NonPositivePrice(int(line_no[r]), list(columns)[c], float(values[r, c]))

    keep = ~bad_ts
    rejected = tuple(int(x) for x in line_no[bad_ts])
    stamps = stamps[keep].dt.floor("min").reset_index(drop=True)
    values = values[keep]
    line_no = line_no[keep]
    if stamps.empty:
        raise EmptyPanel(f"{path} has no parseable rows")

    order = np.argsort(stamps.to_numpy(), kind="stable")
    stamps = stamps.iloc[order].reset_index(drop=True)
    values = values[order]
    line_no = line_no[order]
    dup = stamps.duplicated(keep="first").to_numpy()
    duplicates = tuple(sorted(int(x) for x in line_no[dup]))
    stamps, values, line_no = stamps[~dup].reset_index(drop=True), values[~dup], line_no[~dup]

    day_keys = stamps.dt.normalize()
    tod = stamps - day_keys
    if session is None:
        grid = _infer_session(tod, day_keys, window_len)
    else:
        grid = np.sort(pd.to_timedelta([f"{s}:00" if s.count(":") == 1 else s for s in session]).to_numpy())
        if grid.size != window_len:
            raise SessionGridError(f"session has {grid.size} minutes, expected {window_len}")
    on_grid = np.isin(tod.to_numpy(), grid)
    off_session = tuple(sorted(int(x) for x in line_no[~on_grid]))
    stamps, values, day_keys = stamps[on_grid], values[on_grid], day_keys[on_grid]

    frame = pd.DataFrame(values, index=pd.DatetimeIndex(stamps), columns=list(columns))
    kept_days: list[pd.DataFrame] = []
    dropped: list[tuple[str, float]] = []
    filled = 0
    n_cells = window_len * len(columns)
    for day, chunk in frame.groupby(day_keys.to_numpy()):
        full_index = pd.DatetimeIndex(pd.Timestamp(day) + grid)
        chunk = chunk.reindex(full_index)
        missing = int(chunk.isna().to_numpy().sum())
        frac = missing / n_cells
        if frac > max_missing_frac or missing == n_cells:
            dropped.append((str(pd.Timestamp(day).date()), frac))
            continue
        chunk = chunk.ffill().bfill()
        if chunk.isna().to_numpy().any():
            # an instrument with no quote all day cannot be filled
            dropped.append((str(pd.Timestamp(day).date()), frac))
            continue
        filled += missing
        kept_days.append(chunk)
    if not kept_days:
        raise EmptyPanel(f"{path}: every day was dropped during cleaning")
    clean = pd.concat(kept_days)
    report = CleaningReport(
        rejected_rows=rejected,
        off_session_rows=off_session,
        duplicate_rows=duplicates,
        dropped_days=tuple(dropped),
        filled_cells=filled,
    )
    return PricePanel(
        timestamps=clean.index.to_numpy().astype("datetime64[m]"),
        instruments=tuple(columns),
        prices=clean.to_numpy(float),
        window_len=window_len,
        cleaning=report,
    )


def load_weights(path: str | Path, *, normalize: bool = True) -> WeightVector:
    """Read an ``instrument,weight`` CSV (raw market caps are fine when ``normalize``)."""
    frame = pd.read_csv(path, dtype={"instrument": str})
    for col in ("instrument", "weight"):
        if col not in frame.columns:
            raise MissingColumn(f"weights file {path} lacks column {col!r}")
    raw = dict(zip(frame["instrument"].str.strip(), frame["weight"].astype(float)))
    return WeightVector.normalized(raw) if normalize else WeightVector(raw)


def write_price_panel(panel: PricePanel, path: str | Path) -> Path:
    stamps = np.datetime_as_string(panel.timestamps, unit="m")
    return write_rows(
        path,
        ["timestamp", *panel.instruments],
        ([t, *row] for t, row in zip(stamps, panel.prices.tolist())),
    )


def write_weights(weights: WeightVector, path: str | Path) -> Path:
    return write_rows(path, ["instrument", "weight"], weights.weights.items())


def build_portfolio_series(panel: PricePanel, weights: WeightVector) -> PricePanel:
    """Weighted price combination sum_k w_k P_k(t) as a single ``PORTFOLIO`` column."""
    w = weights.aligned(panel.instruments)
    prices = panel.prices @ w
    anchor = None if panel.anchor is None else np.array([panel.anchor @ w])
    return PricePanel(panel.timestamps, (PORTFOLIO,), prices[:, None], panel.window_len, anchor)


def log_returns(panel: PricePanel, sampling_interval: int = 1) -> list[ReturnSeries]:
    """Intraday log returns per day, sampling every ``sampling_interval`` rows from the first.

    No overnight return is produced: a 240-row day sampled every 5 minutes
    gives 48 prices and 47 returns.
    """
    if sampling_interval < 1 or panel.window_len % sampling_interval:
        raise IntervalNotDivisor(
            f"sampling interval {sampling_interval} does not divide window length {panel.window_len}"
        )
    out = []
    logp = np.log(panel.prices)
    for d in range(panel.n_days):
        sl = slice(d * panel.window_len, (d + 1) * panel.window_len, sampling_interval)
        lp = logp[sl]
        ts = panel.timestamps[sl]
        out.append(
            ReturnSeries(
                date=ts[0].astype("datetime64[D]"),
                timestamps=ts[1:],
                instruments=panel.instruments,
                values=np.diff(lp, axis=0),
                sampling_interval=sampling_interval,
            )
        )
    return out


def continuous_log_returns(panel: PricePanel) -> np.ndarray:
    """One-minute log returns across day boundaries, anchored on ``panel.anchor`` when present.

    A simulated panel of D days x L minutes with an anchor yields exactly D*L
    returns per instrument.
    """
    logp = np.log(panel.prices)
    if panel.anchor is not None:
        logp = np.vstack([np.log(panel.anchor)[None, :], logp])
    return np.diff(logp, axis=0)


def return_windows(panel: PricePanel, *, continuous: bool = False) -> list[DayWindow]:
    """Per-day one-minute return windows for recurrence-network construction.

    Intraday windows hold ``window_len - 1`` returns.  With ``continuous=True``
    (and an anchored panel) each day holds ``window_len`` returns, the first
    one spanning the previous day's last minute.
    """
    L = panel.window_len
    if continuous:
        r = continuous_log_returns(panel)
        offset = 1 if panel.anchor is None else 0
        windows = []
        for d in range(panel.n_days):
            lo = max(d * L - offset, 0)
            hi = (d + 1) * L - offset
            windows.append(
                DayWindow(panel.dates[d], panel.timestamps[d * L : (d + 1) * L][-(hi - lo):],
                          panel.instruments, r[lo:hi])
            )
        return windows
    return [
        DayWindow(rs.date, rs.timestamps, rs.instruments, rs.values)
        for rs in log_returns(panel, 1)
    ]


__all__ = [
    "CleaningReport",
    "DayWindow",
    "PricePanel",
    "ReturnSeries",
    "WeightVector",
    "build_portfolio_series",
    "continuous_log_returns",
    "load_price_panel",
    "load_weights",
    "log_returns",
    "return_windows",
    "write_price_panel",
    "write_weights",
]
