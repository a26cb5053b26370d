"""Synthetic multi-bank minute panel used by the tests, the examples and ``mrnews fixture``.

Real bank minute data is proprietary, so the bundled fixture is a one-factor
model with a slowly varying market correlation and volatility, a handful of
stress days carrying a system-wide co-jump, and occasional single-stock
suspensions (a flat price for a whole day).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mrnews.market_data import PricePanel, WeightVector, write_price_panel, write_weights
from mrnews.simulation import trading_timestamps

BANK_CODES = (
    "sh601398", "sh601939", "sh601288", "sh601988", "sh601328", "sh600036", "sh601166", "sh600000",
    "sh600016", "sz000001", "sh601998", "sh600015", "sh601818", "sh601169", "sz002142", "sh601009",
)


@dataclass(frozen=True)
class FixtureSpec:
    n_days: int = 120
    n_instruments: int = 16
    minutes_per_day: int = 240
    seed: int = 1
    start_date: str = "2012-01-04"
    stress_days: int = 6
    cojump_size: float = 0.03
    suspensions: int = 3
    minute_vol: float = 0.0012
    precursor_coupling: float = 0.97


@dataclass(frozen=True)
class Fixture:
    panel: PricePanel
    weights: WeightVector
    stress_days: tuple[int, ...]
    suspended: tuple[tuple[int, str], ...] = field(default=())


def _ar1(rng: np.random.Generator, n: int, phi: float, scale: float) -> np.ndarray:
    out = np.empty(n)
    x = 0.0
    for i, e in enumerate(rng.standard_normal(n)):
        x = phi * x + scale * e
        out[i] = x
    return out


def synthetic_bank_panel(spec: FixtureSpec | None = None) -> Fixture:
    spec = spec or FixtureSpec()
    if not 2 <= spec.n_instruments <= len(BANK_CODES):
        raise ValueError(f"n_instruments must lie in [2, {len(BANK_CODES)}]")
    if spec.n_days < 1:
        raise ValueError("n_days must be >= 1")
    rng = np.random.default_rng(spec.seed)
    K, D, T = spec.n_instruments, spec.n_days, spec.minutes_per_day
    names = BANK_CODES[:K]

    # daily regime: correlation in (0.1, 0.9), log-volatility AR(1)
    rho = 0.5 + 0.4 * np.tanh(_ar1(rng, D, 0.9, 0.35))
    vol = spec.minute_vol * np.exp(_ar1(rng, D, 0.85, 0.2))
    stress = np.sort(rng.choice(D, size=min(spec.stress_days, D), replace=False))
    rho[stress] = 0.9
    vol[stress] *= 2.0
    # a single tightly coupled day a few sessions ahead of each stress day
    precursor = stress - rng.integers(2, 7, stress.size)
    precursor = precursor[precursor >= 0]
    rho[precursor] = spec.precursor_coupling

    beta = rng.uniform(0.8, 1.2, K)
    factor = rng.standard_normal((D, T))
    idio = rng.standard_normal((D, T, K))
    r = vol[:, None, None] * (
        np.sqrt(rho)[:, None, None] * beta[None, None, :] * factor[:, :, None]
        + np.sqrt(1 - rho)[:, None, None] * idio
    )
    for d in stress:
        minute = rng.integers(10, T - 10)
        r[d, minute, :] -= spec.cojump_size * rng.uniform(0.8, 1.2, K)
    r[:, 0, :] += rng.normal(0.0, 0.004, (D, K))  # overnight gap folded into the open

    suspended = []
    for _ in range(min(spec.suspensions, D)):
        d, k = int(rng.integers(D)), int(rng.integers(K))
        r[d, :, k] = 0.0
        suspended.append((d, names[k]))

    p0 = rng.uniform(4.0, 30.0, K)
    prices = np.round(p0 * np.exp(np.cumsum(r.reshape(D * T, K), axis=0)), 4)
    panel = PricePanel(trading_timestamps(D, T, spec.start_date), names, prices, T)
    caps = rng.lognormal(mean=11.0, sigma=0.8, size=K)  # market capitalisation in 1e4 RMB
    return Fixture(panel, WeightVector.normalized(dict(zip(names, caps))), tuple(int(d) for d in stress), tuple(sorted(suspended)))


def write_fixture(out_dir: str | Path, spec: FixtureSpec | None = None) -> tuple[Path, Path]:
    fx = synthetic_bank_panel(spec)
    out_dir = Path(out_dir)
    return write_price_panel(fx.panel, out_dir / "panel.csv"), write_weights(fx.weights, out_dir / "weights.csv")
