"""Multiplex recurrence networks (MRNs) and their indicators.

Each instrument of a day window becomes one recurrence-network layer on the
shared time axis.  Layer pairs are compared through the mutual information of
their degree sequences and through edge overlap; the pairwise mutual
information also defines an M x M weighted projection whose maximum spanning
tree summarises the backbone of the system.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from mrnews._io import write_rows
from mrnews.errors import EmptyLayersWarning, SizeMismatch
from mrnews.recurrence import (
    EmbeddingConfig,
    RecurrenceMatrix,
    ThresholdPolicy,
    estimate_embedding,
    recurrence_layer,
)


@dataclass(frozen=True)
class Mrn:
    layers: tuple[RecurrenceMatrix, ...]
    labels: tuple[str, ...]
    date: np.datetime64 | None = None
    embedding: EmbeddingConfig | None = None

    def __post_init__(self):
        if len(self.layers) < 2:
            raise ValueError("a multiplex network needs at least two layers")
        if len(self.labels) != len(self.layers):
            raise ValueError("one label per layer required")
        if len({layer.size for layer in self.layers}) != 1:
            raise SizeMismatch("all layers must share the node set")

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_nodes(self) -> int:
        return self.layers[0].size

    @property
    def degenerate(self) -> tuple[bool, ...]:
        return tuple(layer.degenerate for layer in self.layers)


@dataclass(frozen=True)
class WeightedGraph:
    labels: tuple[str, ...]
    weights: np.ndarray  # symmetric [M x M], zero diagonal

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True)
        if w.shape != (len(self.labels), len(self.labels)):
            raise ValueError("weight matrix must be M x M")
        if not np.allclose(w, w.T, rtol=0, atol=0):
            raise ValueError("weight matrix must be symmetric")
        np.fill_diagonal(w, 0.0)
        w.setflags(write=False)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "weights", w)

    def edges(self) -> list[tuple[str, str, float]]:
        M = len(self.labels)
        return [(self.labels[a], self.labels[b], float(self.weights[a, b])) for a, b in itertools.combinations(range(M), 2)]


@dataclass(frozen=True)
class SpanningTree:
    labels: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]

    @property
    def degrees(self) -> dict[str, int]:
        deg = dict.fromkeys(self.labels, 0)
        for a, b, _ in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    @property
    def hub_dominance(self) -> float:
        M = len(self.labels)
        return max(self.degrees.values()) / (M - 1) if M > 1 else 0.0

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))


def _shared_embedding(values: np.ndarray, embedding: EmbeddingConfig) -> EmbeddingConfig:
    if embedding.mode == "fixed":
        return embedding
    estimates = [estimate_embedding(values[:, k]) for k in range(values.shape[1])]
    m = max(e[0] for e in estimates)
    tau = int(np.floor(np.median([e[1] for e in estimates])))
    return EmbeddingConfig(m, max(tau, 1))


def build_mrn(
    window,
    embedding: EmbeddingConfig | None = None,
    threshold: ThresholdPolicy | None = None,
) -> Mrn:
    """One recurrence layer per instrument of ``window`` with a shared (m, tau).

    ``window`` is anything with ``values`` ([time x instrument]),
    ``instruments`` and ``date`` attributes, e.g. a
    :class:`~mrnews.market_data.DayWindow`.  Epsilon is chosen per layer
    from the shared policy; degenerate layers are kept and flagged.
    """
    embedding = embedding or EmbeddingConfig()
    values = np.asarray(window.values, dtype=float)
    if values.ndim != 2 or values.shape[1] < 2:
        raise ValueError("an MRN window needs at least two instruments")
    shared = _shared_embedding(values, embedding)
    layers = tuple(recurrence_layer(values[:, k], shared, threshold) for k in range(values.shape[1]))
    return Mrn(layers, tuple(window.instruments), getattr(window, "date", None), shared)


# --- mutual information ------------------------------------------------------


def _codes(degrees: np.ndarray) -> tuple[np.ndarray, int]:
    _, inv = np.unique(np.asarray(degrees), return_inverse=True)
    return inv.reshape(-1), int(inv.max()) + 1


def _mi_from_codes(a: np.ndarray, na: int, b: np.ndarray, nb: int) -> float:
    n = a.size
    counts = np.bincount(a * nb + b, minlength=na * nb).reshape(na, nb)
    # integer marginals and an exactly rounded sum keep I_ab == I_ba bit for bit
    pa = counts.sum(axis=1) / n
    pb = counts.sum(axis=0) / n
    nz = counts > 0
    joint = counts[nz] / n
    terms = joint * np.log(joint / np.outer(pa, pb)[nz])
    return max(math.fsum(terms.tolist()), 0.0)


def degree_mutual_information(ka, kb) -> float:
    """Mutual information (nats) of two degree sequences over shared nodes, exact integer histogram."""
    ka, kb = np.asarray(ka), np.asarray(kb)
    if ka.shape != kb.shape:
        raise SizeMismatch(f"degree sequences of length {ka.size} and {kb.size}")
    return _mi_from_codes(*_codes(ka), *_codes(kb))


def degree_entropy(k) -> float:
    _, counts = np.unique(np.asarray(k), return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def interlayer_mutual_information(a: RecurrenceMatrix, b: RecurrenceMatrix) -> float:
    """I_ab between the degree sequences of two layers (self-loops excluded)."""
    if a.size != b.size:
        raise SizeMismatch(f"layers of size {a.size} and {b.size}")
    return degree_mutual_information(a.degrees, b.degrees)


def mutual_information_matrix(mrn: Mrn) -> np.ndarray:
    codes = [_codes(layer.degrees) for layer in mrn.layers]
    M = mrn.n_layers
    out = np.zeros((M, M))
    for a, b in itertools.combinations(range(M), 2):
        out[a, b] = out[b, a] = _mi_from_codes(*codes[a], *codes[b])
    return out


def average_mutual_information(
    mrn: Mrn, normalization: Literal["pairs", "as-printed"] = "pairs"
) -> float:
    """Sum of I_ab over layer pairs, divided by the pair count (``pairs``) or by M (``as-printed``)."""
    M = mrn.n_layers
    total = math.fsum(mutual_information_matrix(mrn)[np.triu_indices(M, k=1)].tolist())
    if normalization == "pairs":
        return total / (M * (M - 1) / 2)
    if normalization == "as-printed":
        return total / M
    raise ValueError(f"unknown normalization {normalization!r}")


# --- edge overlap -------------------------------------------------------------


def _upper_edges(mrn: Mrn) -> np.ndarray:
    iu = np.triu_indices(mrn.n_nodes, k=1)
    return np.stack([layer.matrix[iu] for layer in mrn.layers]).astype(np.float64)


def edge_overlap_matrix(
    mrn: Mrn, normalization: Literal["pairwise-2", "as-printed"] = "pairwise-2"
) -> np.ndarray:
    """Pairwise omega_ab; NaN on the diagonal and for pairs with no edges in either layer."""
    c = {"pairwise-2": 2.0, "as-printed": float(mrn.n_layers)}.get(normalization)
    if c is None:
        raise ValueError(f"unknown normalization {normalization!r}")
    U = _upper_edges(mrn)
    counts = U.sum(axis=1)
    both = U @ U.T
    union = counts[:, None] + counts[None, :] - both
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = (counts[:, None] + counts[None, :]) / (c * union)
    omega[union == 0] = np.nan
    np.fill_diagonal(omega, np.nan)
    return omega


def average_edge_overlap(
    mrn: Mrn, normalization: Literal["pairwise-2", "as-printed"] = "pairwise-2"
) -> float:
    """Mean pairwise edge overlap; pairs where both layers are empty are skipped with a warning."""
    omega = edge_overlap_matrix(mrn, normalization)
    vals = omega[np.triu_indices(mrn.n_layers, k=1)]
    skipped = int(np.isnan(vals).sum())
    if skipped:
        warnings.warn(f"{skipped} layer pair(s) without edges skipped", EmptyLayersWarning, stacklevel=2)
    if skipped == vals.size:
        return float("nan")
    return float(np.nanmean(vals))


# --- projection and spanning tree ---------------------------------------------


def projection_network(mrn: Mrn) -> WeightedGraph:
    return WeightedGraph(mrn.labels, mutual_information_matrix(mrn))


def maximum_spanning_tree(graph: WeightedGraph) -> SpanningTree:
    """Kruskal on descending weights; ties go to the lexicographically smaller (alpha, beta) label pair."""
    labels = graph.labels
    M = len(labels)
    parent = list(range(M))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    candidates = []
    for a, b in itertools.combinations(range(M), 2):
        lo, hi = sorted((a, b), key=lambda i: labels[i])
        candidates.append((-float(graph.weights[a, b]), labels[lo], labels[hi], lo, hi))
    candidates.sort()
    edges = []
    for negw, la, lb, a, b in candidates:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            edges.append((la, lb, -negw))
            if len(edges) == M - 1:
                break
    return SpanningTree(labels, tuple(edges))


def write_mst(tree: SpanningTree, edges_path: str | Path, nodes_path: str | Path) -> tuple[Path, Path]:
    deg = tree.degrees
    top = max(deg.values()) if deg else 0
    return (
        write_rows(edges_path, ["alpha", "beta", "weight"], tree.edges),
        write_rows(
            nodes_path,
            ["instrument", "degree", "hub_dominance_flag"],
            ((label, deg[label], deg[label] == top) for label in tree.labels),
        ),
    )


def write_projection(graph: WeightedGraph, path: str | Path) -> Path:
    return write_rows(
        path,
        ["instrument", *graph.labels],
        ((label, *row) for label, row in zip(graph.labels, graph.weights.tolist())),
    )

