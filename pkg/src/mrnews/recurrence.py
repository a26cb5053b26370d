"""Single-layer recurrence networks: delay embedding, threshold selection, recurrence matrices."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from scipy.spatial.distance import pdist, squareform

from mrnews._io import fmt, write_rows
from mrnews.errors import DegenerateTrajectoryWarning, WindowTooShort

MIN_POINTS = 10
AMI_BINS = 16
FNN_TARGET = 0.01
FNN_MAX_DIM = 5


@dataclass(frozen=True)
class EmbeddingConfig:
    m: int = 3
    tau: int = 1
    mode: Literal["fixed", "auto"] = "fixed"

    def __post_init__(self):
        if self.m < 1 or self.tau < 1:
            raise ValueError("embedding dimension and delay must be >= 1")
        if self.mode not in ("fixed", "auto"):
            raise ValueError(f"unknown embedding mode {self.mode!r}")

    def points(self, n: int) -> int:
        return n - (self.m - 1) * self.tau


@dataclass(frozen=True)
class ThresholdPolicy:
    kind: Literal["recurrence-rate", "std-fraction"] = "recurrence-rate"
    value: float = 0.05

    def __post_init__(self):
        if self.kind not in ("recurrence-rate", "std-fraction"):
            raise ValueError(f"unknown threshold policy {self.kind!r}")
        if not 0 < self.value < 1:
            raise ValueError("threshold policy value must lie in (0, 1)")


@dataclass(frozen=True)
class PhaseTrajectory:
    vectors: np.ndarray  # [N' x m]
    source: np.ndarray  # raw window, length N
    m: int
    tau: int

    def __len__(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class RecurrenceMatrix:
    matrix: np.ndarray  # bool [N' x N'], symmetric, unit diagonal
    epsilon: float
    degenerate: bool = False
    degrees: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        R = np.array(self.matrix, dtype=bool, copy=True)
        R.setflags(write=False)
        object.__setattr__(self, "matrix", R)
        k = R.sum(axis=1).astype(np.int64) - R.diagonal().astype(np.int64)
        k.setflags(write=False)
        object.__setattr__(self, "degrees", k)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.degrees.sum()) // 2

    @property
    def recurrence_rate(self) -> float:
        n = self.size
        return 2.0 * self.n_edges / (n * (n - 1)) if n > 1 else 0.0


def embed(window, config: EmbeddingConfig | None = None) -> PhaseTrajectory:
    """Delay vectors (u_i, u_{i+tau}, ..., u_{i+tau(m-1)}) of a scalar window.

    In ``auto`` mode the delay is the first local minimum of the 16-bin
    auto-mutual-information and the dimension the smallest with fewer than
    1% false nearest neighbours (capped at 5).
    """
    config = config or EmbeddingConfig()
    u = np.asarray(window, dtype=float).reshape(-1)
    if config.mode == "auto":
        m, tau = estimate_embedding(u)
        config = EmbeddingConfig(m, tau)
    n_points = config.points(u.size)
    if n_points < MIN_POINTS:
        raise WindowTooShort(
            f"window of {u.size} samples leaves {n_points} delay vectors for m={config.m}, "
            f"tau={config.tau} (need {MIN_POINTS})"
        )
    idx = np.arange(n_points)[:, None] + config.tau * np.arange(config.m)[None, :]
    return PhaseTrajectory(u[idx], u, config.m, config.tau)


def nearest_rank(values: np.ndarray, q: float) -> float:
    """Nearest-rank q-quantile: the ceil(q*n)-th smallest value."""
    values = np.asarray(values, float).reshape(-1)
    k = min(max(math.ceil(q * values.size - 1e-9), 1), values.size) - 1
    return float(np.partition(values, k)[k])


def _epsilon(trajectory: PhaseTrajectory, policy: ThresholdPolicy, dists: np.ndarray | None = None):
    if len(trajectory) < 2:
        raise ValueError("threshold selection needs at least two points")
    if policy.kind == "std-fraction":
        sd = float(np.std(trajectory.source))
        return policy.value * sd, sd == 0.0
    if dists is None:
        dists = pdist(trajectory.vectors)
    if np.all(dists == 0):
        return 0.0, True
    return nearest_rank(dists, policy.value), False


def select_epsilon(trajectory: PhaseTrajectory, policy: ThresholdPolicy | None = None) -> float:
    """Recurrence threshold for ``trajectory``.

    ``recurrence-rate`` returns the nearest-rank q-quantile of the pairwise
    Euclidean distances; ``std-fraction`` returns ``value`` times the standard
    deviation of the raw window.  A trajectory without distance spread yields
    0 and a :class:`DegenerateTrajectoryWarning`.
    """
    eps, degenerate = _epsilon(trajectory, policy or ThresholdPolicy())
    if degenerate:
        warnings.warn("trajectory has zero spread; epsilon set to 0", DegenerateTrajectoryWarning, stacklevel=2)
    return eps


def recurrence_matrix(trajectory, epsilon: float, *, degenerate: bool = False) -> RecurrenceMatrix:
    """R_ij = 1 iff ||x_i - x_j|| < epsilon; coinciding states (distance 0) always recur."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    vectors = trajectory.vectors if isinstance(trajectory, PhaseTrajectory) else np.asarray(trajectory, float)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    d = squareform(pdist(vectors))
    R = (d < epsilon) | (d == 0)
    return RecurrenceMatrix(R, float(epsilon), degenerate)


def recurrence_layer(
    window,
    embedding: EmbeddingConfig | None = None,
    threshold: ThresholdPolicy | None = None,
) -> RecurrenceMatrix:
    """Embed, pick epsilon and build the matrix in one pass over the distance table."""
    traj = embed(window, embedding)
    threshold = threshold or ThresholdPolicy()
    dists = pdist(traj.vectors)
    eps, degenerate = _epsilon(traj, threshold, dists)
    d = squareform(dists)
    R = (d < eps) | (d == 0)
    return RecurrenceMatrix(R, eps, degenerate)


# --- automatic embedding -------------------------------------------------


def auto_mutual_information(u, max_lag: int, bins: int = AMI_BINS) -> np.ndarray:
    """Histogram mutual information (nats) between u_t and u_{t+lag} for lag = 0..max_lag."""
    u = np.asarray(u, float)
    lo, hi = float(u.min()), float(u.max())
    if hi == lo:
        return np.zeros(max_lag + 1)
    codes = np.minimum(((u - lo) / (hi - lo) * bins).astype(int), bins - 1)
    out = np.empty(max_lag + 1)
    for lag in range(max_lag + 1):
        a, b = codes[: u.size - lag], codes[lag:]
        joint = np.bincount(a * bins + b, minlength=bins * bins).reshape(bins, bins) / a.size
        pa, pb = joint.sum(1), joint.sum(0)
        nz = joint > 0
        out[lag] = float(np.sum(joint[nz] * np.log(joint[nz] / np.outer(pa, pb)[nz])))
    return out


def first_minimum_delay(u, max_lag: int | None = None) -> int:
    """First local minimum of the auto-mutual-information; 1 when there is none."""
    u = np.asarray(u, float)
    max_lag = max_lag or max(2, min(u.size // 10, 50))
    ami = auto_mutual_information(u, max_lag + 1)
    for lag in range(1, max_lag + 1):
        if ami[lag] < ami[lag - 1] and ami[lag] <= ami[lag + 1]:
            return lag
    return 1


def false_nearest_fraction(u, m: int, tau: int, r_tol: float = 10.0, a_tol: float = 2.0) -> float:
    """Fraction of nearest neighbours in dimension m that separate when moving to m + 1 (Kennel criteria)."""
    u = np.asarray(u, float)
    n = u.size - m * tau
    if n < 2:
        return 1.0
    idx = np.arange(n)[:, None] + tau * np.arange(m)[None, :]
    x = u[idx]
    d = squareform(pdist(x))
    np.fill_diagonal(d, np.inf)
    nn = np.argmin(d, axis=1)
    r_m = d[np.arange(n), nn]
    extra = np.abs(u[np.arange(n) + m * tau] - u[nn + m * tau])
    sd = float(np.std(u))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(r_m > 0, extra / r_m, np.where(extra > 0, np.inf, 0.0))
    false = ratio > r_tol
    if sd > 0:
        false |= np.sqrt(r_m**2 + extra**2) / sd > a_tol
    return float(false.mean())


def estimate_embedding(u, max_dim: int = FNN_MAX_DIM) -> tuple[int, int]:
    """(m, tau) from the first AMI minimum and the false-nearest-neighbour criterion."""
    u = np.asarray(u, float)
    tau = first_minimum_delay(u)
    for m in range(1, max_dim + 1):
        if u.size - m * tau < MIN_POINTS:
            return max(m - 1, 1), tau
        if false_nearest_fraction(u, m, tau) < FNN_TARGET:
            return m, tau
    return max_dim, tau


# --- debugging dumps ------------------------------------------------------

RLE_MAGIC = "# mrnews recurrence-matrix rle v1"


def write_rle(rm: RecurrenceMatrix, path: str | Path) -> Path:
    """Dump a matrix as run-length-encoded rows.

    Format: the magic line, a ``# size=N epsilon=E degenerate=0|1`` line, then
    one line per row ``<first bit>:<run>,<run>,...`` whose runs alternate
    between the first bit and its complement and sum to N.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [RLE_MAGIC, f"# size={rm.size} epsilon={fmt(rm.epsilon)} degenerate={int(rm.degenerate)}"]
    for row in rm.matrix:
        change = np.flatnonzero(np.diff(row.astype(np.int8))) + 1
        bounds = np.concatenate([[0], change, [row.size]])
        lines.append(f"{int(row[0])}:" + ",".join(str(int(r)) for r in np.diff(bounds)))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_rle(path: str | Path) -> RecurrenceMatrix:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != RLE_MAGIC:
        raise ValueError(f"{path} is not a recurrence-matrix RLE file")
    meta = dict(tok.split("=", 1) for tok in lines[1].lstrip("# ").split())
    n = int(meta["size"])
    R = np.zeros((n, n), dtype=bool)
    for i, line in enumerate(lines[2 : 2 + n]):
        bit, runs = line.split(":")
        bit, pos = int(bit), 0
        for run in map(int, runs.split(",")):
            R[i, pos : pos + run] = bool(bit)
            pos += run
            bit ^= 1
    return RecurrenceMatrix(R, float(meta["epsilon"]), meta["degenerate"] == "1")


def write_edge_list(rm: RecurrenceMatrix, path: str | Path) -> Path:
    i, j = np.nonzero(np.triu(rm.matrix, k=1))
    return write_rows(path, ["i", "j"], zip(i.tolist(), j.tolist()))
