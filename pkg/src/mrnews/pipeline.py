"""End-to-end report: data -> indicators -> peaks -> jump test -> overlap -> spanning trees.

Configuration files are plain ``key = value`` lines (``#`` starts a comment).
Relative paths inside a file are resolved against the file's directory.

Pipeline keys::

    panel = data/panel.csv            # timestamp,<instrument>... minute prices
    weights = data/weights.csv        # instrument,weight (raw caps are normalised)
    out = results                     # output directory
    embedding = 3,1                   # m,tau  or  auto
    threshold = recurrence-rate:0.05  # or std-fraction:<f>
    source = returns                  # returns | continuous-returns | prices
    mi_normalization = pairs          # pairs | as-printed
    overlap_normalization = pairwise-2
    interval = 5                      # jump-test sampling interval (minutes)
    alphas = 0.001,0.0025             # ascending
    horizon = 9
    percentile = 95
    seed = 0
    threads = 1
"""

from __future__ import annotations

import json
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from mrnews._io import fmt, write_rows
from mrnews.errors import ComputeError, ConfigInvalid, DataError, MrnError, ShortSegmentWarning
from mrnews.indicators import IndicatorConfig, day_windows, detect_peaks, indicator_series, risk_intervals
from mrnews.jumptest import daily_jump_tests, write_jump_csv
from mrnews.market_data import load_price_panel, load_weights
from mrnews.mrn import build_mrn, maximum_spanning_tree, projection_network, write_mst
from mrnews.recurrence import EmbeddingConfig, ThresholdPolicy

KINDS = ("I", "omega")


# --- key/value configuration --------------------------------------------------


def read_config(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigInvalid(f"config file not found: {path}")
    out: dict[str, str] = {}
    for n, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigInvalid(f"{path}:{n}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_embedding(text: str) -> EmbeddingConfig:
    text = text.strip()
    try:
        if text == "auto":
            return EmbeddingConfig(mode="auto")
        m, tau = (int(x) for x in text.split(","))
        return EmbeddingConfig(m, tau)
    except ValueError as exc:
        raise ConfigInvalid(f"embedding must be 'm,tau' or 'auto', got {text!r}") from exc


def parse_threshold(text: str) -> ThresholdPolicy:
    kind, _, value = text.strip().partition(":")
    try:
        return ThresholdPolicy(kind, float(value) if value else 0.05)
    except ValueError as exc:
        raise ConfigInvalid(f"bad threshold {text!r}: {exc}") from exc


def parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigInvalid(f"expected comma-separated numbers, got {text!r}") from exc


def _int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigInvalid(f"{key} must be an integer, got {text!r}") from exc


# --- pipeline configuration ---------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    panel: Path
    weights: Path
    out: Path
    indicators: IndicatorConfig = IndicatorConfig()
    interval: int = 5
    alphas: tuple[float, ...] = (0.001, 0.0025)
    horizon: int = 9
    percentile: float = 95.0
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        for name in ("panel", "weights"):
            p = Path(getattr(self, name))
            if not p.is_file():
                raise ConfigInvalid(f"{name} file not found: {p}")
            object.__setattr__(self, name, p)
        object.__setattr__(self, "out", Path(self.out))
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas:
            raise ConfigInvalid("at least one alpha level is required")
        if any(not 0 < a < 0.5 for a in alphas):
            raise ConfigInvalid(f"alpha levels must lie in (0, 0.5): {alphas}")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ConfigInvalid(f"alpha levels must be strictly ascending: {alphas}")
        object.__setattr__(self, "alphas", alphas)
        if self.horizon < 0 or self.interval < 1 or self.threads < 1:
            raise ConfigInvalid("horizon must be >= 0, interval and threads >= 1")
        if not 0 < self.percentile <= 100:
            raise ConfigInvalid("percentile must lie in (0, 100]")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str], base: str | Path | None = None, **overrides) -> "PipelineConfig":
        """Build from ``key = value`` strings; ``overrides`` (already typed) win over the mapping."""
        base = Path(base) if base is not None else Path(".")
        known = {"panel", "weights", "out", "embedding", "threshold", "source", "mi_normalization",
                 "overlap_normalization", "interval", "alphas", "horizon", "percentile", "seed", "threads"}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigInvalid(f"unknown configuration keys: {unknown}")

        def path(key):
            if key not in mapping:
                return None
            p = Path(mapping[key])
            return p if p.is_absolute() else base / p

        ind = IndicatorConfig()
        try:
            ind = replace(
                ind,
                embedding=parse_embedding(mapping["embedding"]) if "embedding" in mapping else ind.embedding,
                threshold=parse_threshold(mapping["threshold"]) if "threshold" in mapping else ind.threshold,
                source=mapping.get("source", ind.source),
                mi_normalization=mapping.get("mi_normalization", ind.mi_normalization),
                overlap_normalization=mapping.get("overlap_normalization", ind.overlap_normalization),
            )
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
        check_modes(ind)
        kwargs = dict(
            panel=path("panel"),
            weights=path("weights"),
            out=path("out") or Path("results"),
            indicators=ind,
        )
        if "interval" in mapping:
            kwargs["interval"] = _int("interval", mapping["interval"])
        if "alphas" in mapping:
            kwargs["alphas"] = parse_floats(mapping["alphas"])
        if "horizon" in mapping:
            kwargs["horizon"] = _int("horizon", mapping["horizon"])
        if "percentile" in mapping:
            kwargs["percentile"] = parse_floats(mapping["percentile"])[0]
        for key in ("seed", "threads"):
            if key in mapping:
                kwargs[key] = _int(key, mapping[key])
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        for key in ("panel", "weights"):
            if kwargs.get(key) is None:
                raise ConfigInvalid(f"missing required key {key!r}")
        return cls(**kwargs)


def check_modes(ind: IndicatorConfig) -> None:
    if ind.source not in ("returns", "continuous-returns", "prices"):
        raise ConfigInvalid(f"unknown source {ind.source!r}")
    if ind.mi_normalization not in ("pairs", "as-printed"):
        raise ConfigInvalid(f"unknown mi_normalization {ind.mi_normalization!r}")
    if ind.overlap_normalization not in ("pairwise-2", "as-printed"):
        raise ConfigInvalid(f"unknown overlap_normalization {ind.overlap_normalization!r}")


# --- report -------------------------------------------------------------------


@dataclass(frozen=True)
class OverlapRow:
    indicator: str
    alpha: float
    n_days: int
    n_peaks: int
    risk_days: int
    n_jumps: int
    covered: int  # jump days inside a risk interval
    exact: int  # jump days that are themselves peak days


OVERLAP_HEADER = [f.name for f in fields(OverlapRow)]


@dataclass(frozen=True)
class ReportBundle:
    out: Path
    indicators_csv: Path
    peaks_csv: Path
    jump_csvs: dict[float, Path]
    overlap_csv: Path
    mst_summary_csv: Path
    summary_json: Path
    overlap: tuple[OverlapRow, ...]
    mst_days: tuple[tuple[int, str], ...] = field(default=())  # (day index, "peak" | "control")

    def files(self) -> list[Path]:
        return sorted(p for p in self.out.rglob("*") if p.is_file())


_CATEGORIES = (ConfigInvalid, DataError, ComputeError)


@contextmanager
def stage(name: str, fallback: type[MrnError] = ComputeError) -> Iterator[None]:
    """Re-raise failures as the matching error category, prefixed with the stage name."""
    try:
        yield
    except MrnError as exc:
        cat = next((c for c in _CATEGORIES if isinstance(exc, c)), fallback)
        raise cat(f"[{name}] {exc}") from exc
    except ValueError as exc:
        raise fallback(f"[{name}] {exc}") from exc


def coverage_counts(jump_days, peak_days, risk_mask) -> tuple[int, int]:
    peaks = set(int(d) for d in peak_days)
    jumps = [int(d) for d in jump_days]
    return sum(bool(risk_mask[d]) for d in jumps), sum(d in peaks for d in jumps)


@dataclass(frozen=True)
class IndicatorStage:
    series: dict
    peaks: dict
    masks: dict
    gap: np.ndarray
    indicators_csv: Path
    peaks_csv: Path


def indicator_stage(
    panel,
    ind_cfg: IndicatorConfig,
    out: Path,
    *,
    horizon: int = 9,
    percentile: float = 95.0,
    threads: int = 1,
    indicators_name: str = "indicators.csv",
) -> IndicatorStage:
    """Indicator series, peaks and risk intervals for both indicators, written as CSV."""
    dates = [str(d) for d in panel.dates]
    T = panel.n_days
    with stage("indicators"):
        series = indicator_series(panel, ind_cfg, KINDS, threads=threads)
    with stage("peaks"), warnings.catch_warnings():
        warnings.simplefilter("ignore", ShortSegmentWarning)
        peaks = {k: detect_peaks(series[k], percentile) for k in KINDS}
        masks = {k: risk_intervals(peaks[k], horizon).mask() for k in KINDS}
    peak_flags = {k: np.isin(np.arange(T), peaks[k].indices) for k in KINDS}
    gap = series["I"].gap | series["omega"].gap

    indicators_csv = write_rows(
        out / indicators_name,
        ["date", "indicator_I", "indicator_omega", "is_gap", "is_peak_I", "is_peak_omega",
         "in_risk_interval_I", "in_risk_interval_omega"],
        (
            (dates[t], series["I"].values[t], series["omega"].values[t], gap[t],
             peak_flags["I"][t], peak_flags["omega"][t], masks["I"][t], masks["omega"][t])
            for t in range(T)
        ),
    )
    peak_rows = []
    for k in KINDS:
        ps = peaks[k]
        for p, thr, lj, rj in zip(ps.indices.tolist(), ps.thresholds, ps.left_jumps, ps.right_jumps):
            peak_rows.append((k, dates[p], p, thr, lj, rj, dates[min(p + horizon, T - 1)]))
    peaks_csv = write_rows(
        out / "peaks.csv",
        ["indicator", "date", "day_index", "delta", "left_jump", "right_jump", "interval_end"],
        peak_rows,
    )
    if series["I"].notes:
        write_rows(out / "gaps.csv", ["date", "day_index", "reason"], ((dates[i], i, r) for i, r in series["I"].notes))
    return IndicatorStage(series, peaks, masks, gap, indicators_csv, peaks_csv)


def run_pipeline(config: PipelineConfig) -> ReportBundle:
    """Run every stage and write all artifacts under ``config.out``.

    Output is a pure function of the inputs and the configuration, so two
    runs produce byte-identical files.
    """
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    ind_cfg = config.indicators

    with stage("load", DataError):
        panel = load_price_panel(config.panel)
        weights = load_weights(config.weights)
        weights.aligned(panel.instruments)
    dates = [str(d) for d in panel.dates]
    T = panel.n_days

    ind = indicator_stage(panel, ind_cfg, out, horizon=config.horizon, percentile=config.percentile, threads=config.threads)
    series, peaks, masks, gap = ind.series, ind.peaks, ind.masks, ind.gap

    jump_csvs: dict[float, Path] = {}
    overlap: list[OverlapRow] = []
    for alpha in config.alphas:
        with stage(f"jumptest alpha={fmt(alpha)}"):
            tests = daily_jump_tests(panel, weights, interval=config.interval, alpha=alpha)
        jump_csvs[alpha] = write_jump_csv(tests, out / f"jumps_alpha_{fmt(alpha)}.csv")
        jump_days = [t for t, r in enumerate(tests) if r.is_jump]
        for k in KINDS:
            covered, exact = coverage_counts(jump_days, peaks[k].indices, masks[k])
            overlap.append(OverlapRow(k, alpha, T, len(peaks[k]), int(masks[k].sum()), len(jump_days), covered, exact))
    overlap_csv = write_rows(out / "overlap.csv", OVERLAP_HEADER, (tuple(getattr(r, h) for h in OVERLAP_HEADER) for r in overlap))

    with stage("mst"):
        mst_days = _mst_exports(panel, ind_cfg, peaks, gap, config.seed, out / "mst", dates)
    mst_summary_csv = out / "mst" / "summary.csv"

    summary = {
        "n_days": T,
        "instruments": list(panel.instruments),
        "indicator_fingerprint": series["I"].fingerprint,
        "gap_days": int(gap.sum()),
        "alphas": list(config.alphas),
        "horizon": config.horizon,
        "overlap": [{h: getattr(r, h) for h in OVERLAP_HEADER} for r in overlap],
        "mst_days": [{"date": dates[d], "group": g} for d, g in mst_days],
    }
    if panel.cleaning is not None:
        c = panel.cleaning
        summary["cleaning"] = {
            "rejected_rows": len(c.rejected_rows),
            "off_session_rows": len(c.off_session_rows),
            "duplicate_rows": len(c.duplicate_rows),
            "dropped_days": [d for d, _ in c.dropped_days],
            "filled_cells": c.filled_cells,
        }
    summary_json = out / "summary.json"
    summary_json.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return ReportBundle(
        out, ind.indicators_csv, ind.peaks_csv, jump_csvs, overlap_csv, mst_summary_csv, summary_json, tuple(overlap), mst_days
    )


def _mst_exports(panel, ind_cfg, peaks, gap, seed, mst_dir: Path, dates) -> tuple[tuple[int, str], ...]:
    """Spanning trees for every peak day plus an equal-sized seeded sample of other non-gap days."""
    peak_days = sorted(set(peaks["I"].indices.tolist()) | set(peaks["omega"].indices.tolist()))
    pool = [t for t in range(panel.n_days) if t not in set(peak_days) and not gap[t]]
    rng = np.random.default_rng(seed)
    n_ctrl = min(len(peak_days), len(pool))
    control = sorted(rng.choice(pool, size=n_ctrl, replace=False).tolist()) if n_ctrl else []
    chosen = sorted([(d, "peak") for d in peak_days] + [(int(d), "control") for d in control])
    windows = day_windows(panel, ind_cfg.source)
    rows = []
    for d, group in chosen:
        tree = maximum_spanning_tree(projection_network(build_mrn(windows[d], ind_cfg.embedding, ind_cfg.threshold)))
        write_mst(tree, mst_dir / f"{dates[d]}_edges.csv", mst_dir / f"{dates[d]}_nodes.csv")
        deg = tree.degrees
        hub = max(sorted(deg), key=lambda k: deg[k])
        rows.append((dates[d], d, group, tree.hub_dominance, hub, tree.total_weight))
    write_rows(mst_dir / "summary.csv", ["date", "day_index", "group", "hub_dominance", "hub", "total_weight"], rows)
    return tuple(chosen)
