"""Command-line entry point: ``mrnews <subcommand> [options]``.

Exit codes: 0 success, 2 usage, 3 invalid configuration, 4 data error,
5 computation error.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from mrnews._io import read_rows, write_rows
from mrnews.benchmark import BenchmarkGrid, BenchmarkParams, INDICATORS, sensitivity_analysis, significance_test
from mrnews.errors import ComputeError, ConfigInvalid, DataError, InsufficientHistory, MrnError, WindowTooLong
from mrnews.fixtures import FixtureSpec, write_fixture
from mrnews.indicators import IndicatorConfig, day_windows
from mrnews.jumptest import daily_jump_tests, write_jump_csv
from mrnews.market_data import build_portfolio_series, load_price_panel, load_weights, write_price_panel
from mrnews.mrn import build_mrn, maximum_spanning_tree, projection_network, write_mst, write_projection
from mrnews.pipeline import (
    PipelineConfig,
    check_modes,
    indicator_stage,
    parse_embedding,
    parse_floats,
    parse_threshold,
    read_config,
    run_pipeline,
    stage,
)
from mrnews.simulation import PROFILES, CalibrationConfig, SimConfig, calibrate_risk_level, frequency_grid, simulate_paths

EXIT_CONFIG, EXIT_DATA, EXIT_COMPUTE = 3, 4, 5


def _output(out: str | None, default_name: str) -> Path:
    """``--out`` is a directory, unless it names a ``.csv`` file directly."""
    if out is None:
        return Path(default_name)
    p = Path(out)
    return p if p.suffix == ".csv" else p / default_name


def _existing(path: str | None, what: str) -> Path:
    if path is None:
        raise ConfigInvalid(f"--{what} is required")
    p = Path(path)
    if not p.is_file():
        raise ConfigInvalid(f"{what} file not found: {p}")
    return p


def _config(args) -> dict[str, str]:
    return read_config(args.config) if args.config else {}


def _threads(args, cfg: dict[str, str]) -> int:
    return args.threads if args.threads is not None else int(cfg.get("threads", 1))


# --- simulate / calibrate -----------------------------------------------------

_RANGE_FIELDS = {"annual_return", "annual_volatility", "initial_price", "positive_jump", "negative_jump"}


def sim_config(mapping: dict[str, str], extra_keys=(), **overrides) -> SimConfig:
    """SimConfig from ``key = value`` strings; keys in ``extra_keys`` belong to the caller."""
    names = {f.name for f in fields(SimConfig)}
    unknown = sorted(set(mapping) - names - set(extra_keys) - {"threads"})
    if unknown:
        raise ConfigInvalid(f"unknown configuration keys: {unknown}")
    kwargs = {}
    for key, text in mapping.items():
        if key not in names or key == "seed":
            continue
        if key in _RANGE_FIELDS:
            vals = parse_floats(text)
            if len(vals) != 2:
                raise ConfigInvalid(f"{key} needs 'low,high'")
            kwargs[key] = vals
        elif key in ("diffusion", "start_date"):
            kwargs[key] = text
        elif key in ("n_assets", "n_days", "minutes_per_day", "days_per_year"):
            kwargs[key] = int(text)
        else:
            kwargs[key] = float(text)
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return SimConfig(**kwargs)


def cmd_simulate(args) -> None:
    cfg = _config(args)
    p = args.p
    sim = sim_config(
        cfg,
        n_days=args.days,
        n_assets=args.assets,
        p_cojump_pos=p,
        p_cojump_neg=p,
        seed=args.seed if args.seed is not None else int(cfg.get("seed", 0)),
    )
    panel, log = simulate_paths(sim)
    prices = _output(args.out, "prices.csv")
    write_price_panel(panel, prices)
    truth = Path(args.truth) if args.truth else prices.with_name("cojumps.csv")
    log.write_csv(truth)
    write_rows(prices.with_name("initial_prices.csv"), ["instrument", "price"], zip(panel.instruments, panel.anchor))
    print(f"{panel.n_days} days x {len(panel.instruments)} assets, {log.count()} co-jumps -> {prices}")


def cmd_calibrate(args) -> None:
    cfg = _config(args)
    profile = PROFILES[args.profile or cfg.get("profile", "desk")]
    grid = frequency_grid(args.grid or cfg["grid"]) if (args.grid or "grid" in cfg) else profile["grid"]
    runs = args.runs or int(cfg.get("runs", profile["runs"]))
    sim = sim_config(
        cfg,
        ("grid", "runs", "profile", "embedding", "threshold", "horizon", "scoring"),
        n_days=args.days or int(cfg.get("n_days", profile["n_days"])),
    )
    ind = IndicatorConfig(source="continuous-returns")
    if "embedding" in cfg:
        ind = replace(ind, embedding=parse_embedding(cfg["embedding"]))
    if "threshold" in cfg:
        ind = replace(ind, threshold=parse_threshold(cfg["threshold"]))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    cal = CalibrationConfig(
        sim=sim,
        indicators=ind,
        horizon=int(cfg.get("horizon", 9)),
        scoring=args.scoring or cfg.get("scoring", "truth"),
        seed=seed,
    )
    if args.profile == "full" and args.runs is None:
        print("full profile: 50 frequencies x 50 runs; expect hours of compute", file=sys.stderr)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = calibrate_risk_level(grid, runs, cal, threads=_threads(args, cfg))
    path = result.write_csv(_output(args.out, "calibration.csv"))
    rows = []
    for kind in result.kinds:
        mean = result.mean_objective(kind)
        best = result.argmin(kind)
        rows += [(kind, f, m, f == best) for f, m in zip(result.frequencies, mean)]
    write_rows(path.with_name(path.stem + "_summary.csv"), ["indicator", "frequency", "mean_objective", "is_optimum"], rows)
    for kind in result.kinds:
        print(f"{kind}: optimal frequency {result.argmin(kind):g}")


# --- empirical subcommands ----------------------------------------------------


def _panel_and_weights(args, need_weights: bool):
    panel_path = _existing(args.panel, "panel")
    weights_path = _existing(args.weights, "weights") if (need_weights or args.weights) else None
    with stage("load", DataError):
        panel = load_price_panel(panel_path)
        weights = load_weights(weights_path) if weights_path else None
        if weights is not None:
            weights.aligned(panel.instruments)
    return panel, weights


def _indicator_config(args, cfg: dict[str, str]) -> IndicatorConfig:
    embedding = parse_embedding(args.embedding or cfg.get("embedding", "3,1"))
    if args.rr is not None:
        threshold = parse_threshold(f"recurrence-rate:{args.rr}")
    else:
        threshold = parse_threshold(cfg.get("threshold", "recurrence-rate:0.05"))
    ind = IndicatorConfig(
        embedding,
        threshold,
        source=args.source or cfg.get("source", "returns"),
        mi_normalization=cfg.get("mi_normalization", "pairs"),
        overlap_normalization=cfg.get("overlap_normalization", "pairwise-2"),
    )
    check_modes(ind)
    return ind


def cmd_indicators(args) -> None:
    cfg = _config(args)
    panel, _ = _panel_and_weights(args, need_weights=True)
    ind = _indicator_config(args, cfg)
    out = _output(args.out, "indicators.csv")
    horizon = args.horizon if args.horizon is not None else int(cfg.get("horizon", 9))
    res = indicator_stage(
        panel, ind, out.parent, horizon=horizon, threads=_threads(args, cfg), indicators_name=out.name
    )
    print(f"{len(res.peaks['I'])} I peaks, {len(res.peaks['omega'])} omega peaks -> {out}")


def cmd_jumptest(args) -> None:
    cfg = _config(args)
    panel, weights = _panel_and_weights(args, need_weights=True)
    interval = args.interval or int(cfg.get("interval", 5))
    alpha = args.alpha or float(cfg.get("alpha", 0.001))
    with stage("jumptest"):
        tests = daily_jump_tests(panel, weights, interval=interval, alpha=alpha)
    path = write_jump_csv(tests, _output(args.out, "jumps.csv"))
    print(f"{sum(t.is_jump for t in tests)} jump days of {len(tests)} -> {path}")


def read_grid(path: str | Path) -> BenchmarkGrid:
    cfg = read_config(path)
    kwargs = {}
    for f in fields(BenchmarkGrid):
        if f.name not in cfg:
            continue
        text = cfg.pop(f.name)
        if f.name == "detrend_window":
            kwargs[f.name] = int(text)
            continue
        vals = frequency_grid(text)
        kwargs[f.name] = tuple(vals if f.name == "kernel_bandwidth" else (int(round(v)) for v in vals))
    if cfg:
        raise ConfigInvalid(f"unknown grid keys: {sorted(cfg)}")
    return BenchmarkGrid(**kwargs)


def read_crises(path: str | Path, dates: Sequence[str]) -> list[int]:
    """Crisis day indices from a CSV with a ``date`` column (a jump-test CSV keeps ``is_jump`` rows)."""
    rows = read_rows(path)
    if not rows or "date" not in rows[0]:
        raise DataError(f"crisis file {path} needs a 'date' column")
    if "is_jump" in rows[0]:
        rows = [r for r in rows if r["is_jump"] == "true"]
    index = {d: i for i, d in enumerate(dates)}
    out = []
    for r in rows:
        if r["date"] not in index:
            raise DataError(f"crisis date {r['date']} is not a trading day of the panel")
        out.append(index[r["date"]])
    return sorted(set(out))


def _combo_label(p: BenchmarkParams) -> str:
    return f"bw={p.kernel_bandwidth:g};w={p.rolling_window};lkw={p.lkw};lkend={p.lkend}"


def read_daily_closes(path: str | Path) -> tuple[np.ndarray, list[str]] | None:
    """``date,<level>`` file with one row per trading day, or None for a minute panel."""
    rows = read_rows(path)
    if not rows or "date" not in rows[0]:
        return None
    cols = [c for c in rows[0] if c != "date"]
    if len(cols) != 1:
        raise DataError(f"daily close file {path} needs exactly one value column besides 'date'")
    dates = [r["date"] for r in rows]
    if len(set(dates)) != len(dates) or dates != sorted(dates):
        raise DataError(f"daily close file {path} needs strictly increasing dates")
    try:
        close = np.array([float(r[cols[0]]) for r in rows])
    except ValueError as exc:
        raise DataError(f"daily close file {path}: {exc}") from exc
    if not np.all(np.isfinite(close)):
        raise DataError(f"daily close file {path} contains non-finite values")
    return close, dates


def _benchmark_closes(args) -> tuple[np.ndarray, list[str]]:
    daily = read_daily_closes(_existing(args.panel, "panel"))
    if daily is not None:
        return daily
    panel, weights = _panel_and_weights(args, need_weights=False)
    if weights is not None:
        panel = build_portfolio_series(panel, weights)
    elif len(panel.instruments) > 1:
        raise ConfigInvalid("multi-instrument panels need --weights to form the portfolio price")
    # last minute of each session is the daily close
    return panel.prices[panel.window_len - 1 :: panel.window_len, 0], [str(d) for d in panel.dates]


def cmd_benchmark(args) -> None:
    cfg = _config(args)
    close, dates = _benchmark_closes(args)
    crises = read_crises(_existing(args.crises, "crises"), dates)
    grid = read_grid(args.grid) if args.grid else BenchmarkGrid()
    history = args.history or int(cfg.get("history", 1000))
    level = float(cfg.get("level", 0.1))
    combos, rejected = grid.combinations()
    rows = []
    for c in crises:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            hist = sensitivity_analysis(close, c, combos)
            for params in hist.params:
                try:
                    sig = significance_test(close, c, params, history=history, level=level)
                except (InsufficientHistory, WindowTooLong):
                    sig = None
                for name in INDICATORS:
                    tau = float(hist.taus[name][hist.params.index(params)])
                    p = sig[name].p_value if sig else float("nan")
                    rows.append((dates[c], name, _combo_label(params), tau, hist.passes(name), p, bool(sig and sig[name].significant)))
        if not hist.params:
            rows += [(dates[c], name, "insufficient-history", float("nan"), False, float("nan"), False) for name in INDICATORS]
    path = write_rows(
        _output(args.out, "benchmark_report.csv"),
        ["crisis_date", "indicator", "param_combo", "tau", "passes_sensitivity", "p_value", "significant"],
        rows,
    )
    print(f"{len(crises)} crises x {len(combos)} parameter sets ({rejected} rejected by length) -> {path}")


def cmd_mst(args) -> None:
    cfg = _config(args)
    panel, _ = _panel_and_weights(args, need_weights=False)
    ind = _indicator_config(args, cfg)
    dates = [str(d) for d in panel.dates]
    if args.date not in dates:
        raise DataError(f"{args.date} is not a trading day of the panel")
    d = dates.index(args.date)
    with stage("mst"):
        graph = projection_network(build_mrn(day_windows(panel, ind.source)[d], ind.embedding, ind.threshold))
        tree = maximum_spanning_tree(graph)
    out = Path(args.out or ".")
    write_mst(tree, out / f"{args.date}_edges.csv", out / f"{args.date}_nodes.csv")
    write_projection(graph, out / f"{args.date}_projection.csv")
    print(f"hub dominance {tree.hub_dominance:.3f} -> {out}")


def cmd_report(args) -> None:
    cfg = _config(args)
    base = Path(args.config).parent if args.config else Path(".")
    bundle = run_pipeline(
        PipelineConfig.from_mapping(
            cfg,
            base,
            panel=Path(args.panel) if args.panel else None,
            weights=Path(args.weights) if args.weights else None,
            out=Path(args.out) if args.out else None,
            seed=args.seed,
            threads=args.threads,
        )
    )
    for r in bundle.overlap:
        print(f"{r.indicator} alpha={r.alpha:g}: {r.covered} of {r.n_jumps} jumps in risk intervals, {r.exact} on peak days")
    print(f"report -> {bundle.out}")


def cmd_fixture(args) -> None:
    spec = FixtureSpec(
        n_days=args.days,
        n_instruments=args.instruments,
        seed=args.seed if args.seed is not None else FixtureSpec.seed,
    )
    panel_path, weights_path = write_fixture(args.out or "fixture", spec)
    print(f"fixture -> {panel_path}, {weights_path}")


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--threads", type=int, help="maximum worker processes (default 1)")
    common.add_argument("--out", help="output directory (or a .csv path for single-file outputs)")

    parser = argparse.ArgumentParser(prog="mrnews", description="Multiplex recurrence network early-warning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p, weights_required=False, panel_help="minute price CSV (timestamp,<instrument>...)"):
        p.add_argument("--panel", help=panel_help)
        p.add_argument("--weights", help="instrument,weight CSV" + (" (required)" if weights_required else ""))

    def mrn_args(p):
        p.add_argument("--embedding", help="m,tau or auto (default 3,1)")
        p.add_argument("--rr", type=float, help="target recurrence rate (default 0.05)")
        p.add_argument("--source", choices=["returns", "continuous-returns", "prices"])

    p = sub.add_parser("simulate", parents=[common], help="simulate co-jump diffusion paths")
    p.add_argument("--days", type=int)
    p.add_argument("--assets", type=int)
    p.add_argument("--p", type=float, help="per-minute co-jump probability for each direction")
    p.add_argument("--truth", help="co-jump log CSV (default next to the prices)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", parents=[common], help="calibrate the detection risk level")
    p.add_argument("--grid", help="start:stop:step or comma list of co-jump frequencies")
    p.add_argument("--runs", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--profile", choices=sorted(PROFILES))
    p.add_argument("--scoring", choices=["truth", "bns"])
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("indicators", parents=[common], help="daily MRN indicators, peaks and risk intervals")
    data_args(p, True)
    mrn_args(p)
    p.add_argument("--horizon", type=int)
    p.set_defaults(func=cmd_indicators)

    p = sub.add_parser("jumptest", parents=[common], help="BNS jump test on the weighted portfolio")
    data_args(p, True)
    p.add_argument("--interval", type=int)
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=cmd_jumptest)

    p = sub.add_parser("benchmark", parents=[common], help="critical-slowing-down benchmark")
    data_args(p, panel_help="daily close CSV (date,<level>) or minute price panel")
    p.add_argument("--crises", help="CSV with a date column (jump-test output accepted)")
    p.add_argument("--grid", help="parameter grid file")
    p.add_argument("--history", type=int)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("mst", parents=[common], help="maximum spanning tree of one day's MRN projection")
    data_args(p)
    mrn_args(p)
    p.add_argument("--date", required=True, help="YYYY-MM-DD")
    p.set_defaults(func=cmd_mst)

    p = sub.add_parser("report", parents=[common], help="full pipeline from a configuration file")
    data_args(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fixture", parents=[common], help="write the synthetic bank panel")
    p.add_argument("--days", type=int, default=FixtureSpec.n_days)
    p.add_argument("--instruments", type=int, default=FixtureSpec.n_instruments)
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigInvalid("--threads must be >= 1")
        args.func(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ComputeError, MrnError) as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
