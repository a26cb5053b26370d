"""Barndorff-Nielsen/Shephard bipower-variation jump test on intraday returns.

Days whose portfolio returns reject the no-jump null are treated as realised
banking-system crisis days.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate, special, stats

from mrnews._io import write_rows
from mrnews.errors import EmptyDay, TooFewReturns
from mrnews.market_data import PricePanel, WeightVector, build_portfolio_series, log_returns

MU_43 = 2 ** (2 / 3) * special.gamma(7 / 6) / special.gamma(1 / 2)
# (pi/2)^2 + pi - 5
THETA = (math.pi / 2) ** 2 + math.pi - 5


def _check_mu43() -> None:
    # E|Z|^{4/3} for standard normal Z, by quadrature
    val, _ = integrate.quad(lambda z: abs(z) ** (4 / 3) * math.exp(-z * z / 2) / math.sqrt(2 * math.pi), -np.inf, np.inf)
    if abs(val - MU_43) > 1e-8:
        raise RuntimeError(f"mu_4/3 mismatch: closed form {MU_43}, quadrature {val}")


_check_mu43()


@dataclass(frozen=True)
class JumpTestResult:
    date: object
    n_returns: int
    rv: float
    bv: float
    tp: float
    z: float
    alpha: float
    z_threshold: float
    is_jump: bool
    degenerate: bool


def realized_volatility(returns) -> float:
    r = np.asarray(returns, dtype=float)
    if r.size < 1:
        raise EmptyDay("no returns")
    return float(np.sum(r * r))


def bipower_variation(returns) -> float:
    r = np.abs(np.asarray(returns, dtype=float))
    M = r.size
    if M < 2:
        raise TooFewReturns(f"bipower variation needs 2 returns, got {M}")
    return float(math.pi / 2 * (M / (M - 1)) * np.sum(r[1:] * r[:-1]))


def tripower_quarticity(returns) -> float:
    a = np.abs(np.asarray(returns, dtype=float)) ** (4 / 3)
    M = a.size
    if M < 3:
        raise TooFewReturns(f"tripower quarticity needs 3 returns, got {M}")
    return float(MU_43**-3 * (M * M / (M - 2)) * np.sum(a[2:] * a[1:-1] * a[:-2]))


def z_threshold(alpha: float) -> float:
    return float(stats.norm.ppf(1.0 - alpha))


def bns_test(returns, alpha: float = 0.001, date=None) -> JumpTestResult:
    """One-sided BNS ratio test; a jump is flagged when Z exceeds the (1 - alpha) normal quantile.

    Flat days (RV = 0) and days with BV = 0 are flagged degenerate and never
    reported as jumps.
    """
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5)")
    r = np.asarray(returns, dtype=float)
    M = r.size
    if M < 3:
        raise TooFewReturns(f"BNS test needs at least 3 returns, got {M}")
    rv = realized_volatility(r)
    bv = bipower_variation(r)
    tp = tripower_quarticity(r)
    thr = z_threshold(alpha)
    if rv == 0:
        return JumpTestResult(date, M, rv, bv, tp, float("nan"), alpha, thr, False, True)
    # BV = 0 (isolated non-zero returns): the quarticity ratio is taken as 1
    scale = max(1.0, tp / bv**2) if bv > 0 else 1.0
    z = (1.0 - bv / rv) / math.sqrt(THETA / M * scale)
    degenerate = bv == 0
    return JumpTestResult(date, M, rv, bv, tp, z, alpha, thr, bool(z > thr) and not degenerate, degenerate)


def daily_jump_tests(
    panel: PricePanel,
    weights: WeightVector | None = None,
    *,
    interval: int = 5,
    alpha: float = 0.001,
) -> list[JumpTestResult]:
    """BNS test for each day of the weighted portfolio (or of a one-column panel)."""
    if weights is not None:
        panel = build_portfolio_series(panel, weights)
    elif len(panel.instruments) != 1:
        raise ValueError("multi-instrument panels need portfolio weights")
    return [bns_test(rs.vector, alpha, rs.date) for rs in log_returns(panel, interval)]


JUMP_HEADER = ["date", "M", "RV", "BV", "TP", "Z", "threshold", "is_jump", "degenerate"]


def write_jump_csv(results: Sequence[JumpTestResult], path: str | Path) -> Path:
    return write_rows(
        path,
        JUMP_HEADER,
        ((str(r.date), r.n_returns, r.rv, r.bv, r.tp, r.z, r.z_threshold, r.is_jump, r.degenerate) for r in results),
    )
