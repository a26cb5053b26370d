from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from mrnews.fixtures import FixtureSpec, synthetic_bank_panel, write_fixture
from mrnews.pipeline import PipelineConfig, run_pipeline
from mrnews.simulation import session_minutes


def minute_stamps(day: str, n: int = 240) -> list[str]:
    mins = session_minutes(n)
    return [f"{day} {m // 60:02d}:{m % 60:02d}" for m in mins]


def write_minute_csv(path: Path, days: dict[str, np.ndarray], instruments: list[str], drop: dict[str, list[int]] | None = None) -> Path:
    """Write ``timestamp,<inst>...`` rows; ``drop`` removes row positions within a day."""
    drop = drop or {}
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", *instruments])
        for day, values in days.items():
            skip = set(drop.get(day, ()))
            for i, (ts, row) in enumerate(zip(minute_stamps(day, len(values)), values)):
                if i not in skip:
                    w.writerow([ts, *[repr(float(v)) for v in row]])
    return path


@pytest.fixture
def two_day_csv(tmp_path):
    rng = np.random.default_rng(0)
    days = {d: 10 + np.cumsum(rng.normal(0, 0.01, (240, 2)), axis=0) for d in ("2020-01-02", "2020-01-03")}
    return write_minute_csv(tmp_path / "two_days.csv", days, ["A", "B"]), days


@pytest.fixture(scope="session")
def bank_fixture():
    return synthetic_bank_panel(FixtureSpec(n_days=60, seed=1))


@pytest.fixture(scope="session")
def fixture_files(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture")
    return write_fixture(out, FixtureSpec())


@pytest.fixture(scope="session")
def fixture_report(fixture_files, tmp_path_factory):
    panel, weights = fixture_files
    out = tmp_path_factory.mktemp("report")
    cfg = PipelineConfig(panel, weights, out, alphas=(0.001, 0.0025))
    return cfg, run_pipeline(cfg)


# --- acceptance report ----------------------------------------------------------

_ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def acceptance():
    """``acceptance(n, ok, detail)`` records one check towards criterion ``n``."""

    def record(n: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.setdefault(n, []).append((bool(ok), detail))
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[n]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"{status} criterion {n:2d}: " + "; ".join(d for _, d in parts))
