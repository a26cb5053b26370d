from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrnews.errors import DegenerateTrajectoryWarning, WindowTooShort
from mrnews.recurrence import (
    EmbeddingConfig,
    PhaseTrajectory,
    ThresholdPolicy,
    embed,
    estimate_embedding,
    first_minimum_delay,
    nearest_rank,
    read_rle,
    recurrence_layer,
    recurrence_matrix,
    select_epsilon,
    write_edge_list,
    write_rle,
)

seeds = st.integers(0, 2**32 - 1)


def traj(points) -> PhaseTrajectory:
    v = np.asarray(points, float).reshape(len(points), -1)
    return PhaseTrajectory(v, v[:, 0], v.shape[1], 1)


def test_embed_m2():
    t = embed(np.arange(1, 13), EmbeddingConfig(2, 1))
    assert t.vectors[:4].tolist() == [[1, 2], [2, 3], [3, 4], [4, 5]]
    assert len(t) == 11


def test_embed_m1_is_identity():
    u = np.random.default_rng(0).normal(size=50)
    np.testing.assert_array_equal(embed(u, EmbeddingConfig(1, 1)).vectors[:, 0], u)


def test_embed_m3_tau2_by_enumeration():
    u = np.arange(1, 15, dtype=float)
    m, tau = 3, 2
    expected = [[u[i + tau * k] for k in range(m)] for i in range(u.size) if i + tau * (m - 1) < u.size]
    got = embed(u, EmbeddingConfig(m, tau)).vectors
    assert got.tolist() == expected
    assert got[:2].tolist() == [[1, 3, 5], [2, 4, 6]]


def test_short_window_rejected():
    with pytest.raises(WindowTooShort):
        embed(np.arange(6), EmbeddingConfig(2, 2))


def test_collinear_quantile():
    t = traj([[0.0], [1.0], [3.0]])  # pairwise distances 1, 3, 2
    assert select_epsilon(t, ThresholdPolicy("recurrence-rate", 1 / 3)) == 1.0


def test_constant_window_std_fraction_degenerate():
    t = embed(np.full(40, 2.5))
    with pytest.warns(DegenerateTrajectoryWarning):
        assert select_epsilon(t, ThresholdPolicy("std-fraction", 0.1)) == 0.0
    layer = recurrence_layer(np.full(40, 2.5), threshold=ThresholdPolicy("std-fraction", 0.1))
    assert layer.degenerate and layer.matrix.all()


def test_recurrence_rate_on_gaussian_window():
    u = np.random.default_rng(11).standard_normal(240)
    t = embed(u)
    eps = select_epsilon(t)
    R = recurrence_matrix(t, eps)
    assert abs(R.recurrence_rate - 0.05) <= 0.005
    # brute-force pairwise-distance oracle
    n = len(t)
    below = sum(
        np.linalg.norm(t.vectors[i] - t.vectors[j]) < eps for i, j in itertools.combinations(range(n), 2)
    )
    assert R.n_edges == below


def test_epsilon_zero_identity_and_inf_all_ones():
    t = embed(np.random.default_rng(1).standard_normal(30))
    assert np.array_equal(recurrence_matrix(t, 0.0).matrix, np.eye(len(t), dtype=bool))
    assert recurrence_matrix(t, math.inf).matrix.all()


def test_explicit_distance_table():
    R = recurrence_matrix(traj([[0.0], [10.0], [0.5]]), 1.0).matrix
    expected = np.array([[1, 0, 1], [0, 1, 0], [1, 0, 1]], dtype=bool)
    np.testing.assert_array_equal(R, expected)


def test_degrees_exclude_self_loops():
    R = recurrence_matrix(traj([[0.0], [10.0], [0.5]]), 1.0)
    assert R.degrees.tolist() == [1, 0, 1]


def test_nearest_rank_definition():
    vals = np.array([5.0, 1.0, 4.0, 2.0, 3.0])
    assert [nearest_rank(vals, q) for q in (0.2, 0.4, 0.41, 1.0)] == [1.0, 2.0, 3.0, 5.0]


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(12, 60), st.integers(1, 4))
def test_matrix_symmetric_unit_diagonal(seed, n, m):
    u = np.random.default_rng(seed).normal(size=n + m)
    t = embed(u, EmbeddingConfig(m, 1))
    R = recurrence_matrix(t, select_epsilon(t)).matrix
    assert np.array_equal(R, R.T)
    assert R.diagonal().all()


@settings(max_examples=50, deadline=None)
@given(seeds, st.floats(0, 3), st.floats(0, 3))
def test_monotone_in_epsilon(seed, a, b):
    t = embed(np.random.default_rng(seed).normal(size=40))
    lo, hi = sorted((a, b))
    assert not np.any(recurrence_matrix(t, lo).matrix & ~recurrence_matrix(t, hi).matrix)


@settings(max_examples=50, deadline=None)
@given(seeds, st.floats(0.01, 0.5), st.integers(15, 80))
def test_realized_rate_tracks_target(seed, q, n):
    # continuous draws: pairwise distances are distinct almost surely
    t = embed(np.random.default_rng(seed).normal(size=n))
    R = recurrence_matrix(t, select_epsilon(t, ThresholdPolicy("recurrence-rate", q)))
    assert abs(R.recurrence_rate - q) <= 2 / (len(t) - 1)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 5), st.integers(1, 4))
def test_first_column_reproduces_window(seed, m, tau):
    u = np.random.default_rng(seed).normal(size=60)
    t = embed(u, EmbeddingConfig(m, tau))
    np.testing.assert_array_equal(t.vectors[:, 0], u[: len(t)])


def test_auto_embedding_on_sine():
    x = np.sin(np.arange(240) * 2 * np.pi / 40)
    tau = first_minimum_delay(x + 1e-3 * np.random.default_rng(0).normal(size=240))
    assert 5 <= tau <= 15  # quarter period is 10
    m, _ = estimate_embedding(x)
    assert 1 <= m <= 5
    assert embed(x, EmbeddingConfig(mode="auto")).m == m


def test_white_noise_delay_falls_back_to_small_lag():
    assert first_minimum_delay(np.random.default_rng(2).normal(size=240)) >= 1


def test_rle_roundtrip(tmp_path):
    layer = recurrence_layer(np.random.default_rng(5).normal(size=80))
    back = read_rle(write_rle(layer, tmp_path / "r.rle"))
    assert np.array_equal(back.matrix, layer.matrix)
    assert back.epsilon == pytest.approx(layer.epsilon, rel=1e-11)
    lines = (tmp_path / "r.rle").read_text().splitlines()
    assert lines[0].startswith("# mrnews")
    edges = write_edge_list(layer, tmp_path / "e.csv").read_text().splitlines()
    assert len(edges) - 1 == layer.n_edges
