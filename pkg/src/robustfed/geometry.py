"""Vector-set geometry shared by all aggregation rules.

Pairwise squared Euclidean distances, per-client neighbor orderings, and
mean/spread statistics of vector sets. Everything here is a pure function
of its inputs and runs in 64-bit floating point.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass
class GradientSet:
    """N client update vectors of dimension d, in client-id order."""

    vectors: np.ndarray
    client_ids: np.ndarray | None = None

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError(f"vectors must be 2-D (N, d), got shape {self.vectors.shape}")
        n, d = self.vectors.shape
        if n < 1 or d < 1:
            raise ValueError(f"need N >= 1 and d >= 1, got N={n}, d={d}")
        if self.client_ids is None:
            self.client_ids = np.arange(n)
        else:
            self.client_ids = np.asarray(self.client_ids, dtype=np.int64)
        if self.client_ids.shape != (n,):
            raise ValueError("client_ids must have one entry per vector")
        if len(set(self.client_ids.tolist())) != n:
            raise ValueError("client_ids must be distinct")
        finite_rows = np.isfinite(self.vectors).all(axis=1)
        if not finite_rows.all():
            bad = int(self.client_ids[int(np.argmin(finite_rows))])
            raise ValueError(f"non-finite update component from client {bad}")

    @property
    def n_clients(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class DistanceMatrix:
    """Symmetric N x N matrix of pairwise squared Euclidean distances."""

    entries: np.ndarray

    @property
    def n_clients(self) -> int:
        return self.entries.shape[0]


@dataclass
class NeighborOrder:
    """Per client, the other clients sorted by ascending squared distance.

    ``indices[k]`` holds positional indices into the originating GradientSet;
    ties are broken by ascending index so the ordering is deterministic.
    """

    indices: np.ndarray    # (N, N-1) int
    distances: np.ndarray  # (N, N-1) float, ascending per row

    @property
    def n_clients(self) -> int:
        return self.indices.shape[0]


@dataclass
class VectorSetStats:
    """Mean vector and root-mean-square distance to it (population form)."""

    mean: np.ndarray
    spread: float


def pairwise_sq_distances(g: GradientSet) -> DistanceMatrix:
    """Squared Euclidean distance between every pair of client updates.

    Computed as sum_i (a_i - b_i)^2 rather than ||a||^2 + ||b||^2 - 2ab,
    which loses precision catastrophically on near-identical updates.
    """
    n = g.n_clients
    out = np.empty((n, n), dtype=np.float64)
    for k in range(n):
        diff = g.vectors - g.vectors[k]
        out[k] = np.einsum("ij,ij->i", diff, diff)
    return DistanceMatrix(out)


def neighbor_order(m: DistanceMatrix) -> NeighborOrder:
    """Sort each client's peers by ascending squared distance, ties by index."""
    n = m.n_clients
    if n < 2:
        return NeighborOrder(
            indices=np.empty((n, 0), dtype=np.intp),
            distances=np.empty((n, 0), dtype=np.float64),
        )
    indices = np.empty((n, n - 1), dtype=np.intp)
    distances = np.empty((n, n - 1), dtype=np.float64)
    for k in range(n):
        others = np.concatenate([np.arange(k), np.arange(k + 1, n)])
        row = m.entries[k, others]
        order = np.argsort(row, kind="stable")  # stable keeps ascending-index tie order
        indices[k] = others[order]
        distances[k] = row[order]
    return NeighborOrder(indices=indices, distances=distances)


def vector_set_stats(subset: np.ndarray) -> VectorSetStats:
    """Mean and population RMS spread of a nonempty set of equal-length vectors."""
    arr = np.asarray(subset, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("subset must be a nonempty 2-D array of vectors")
    mean = arr.mean(axis=0)
    diff = arr - mean
    spread = float(np.sqrt(np.einsum("ij,ij->i", diff, diff).mean()))
    return VectorSetStats(mean=mean, spread=spread)


def write_distance_csv(m: DistanceMatrix, client_ids, path) -> None:
    """Debug dump: one row per client, full N columns, headers = client ids."""
    ids = [int(c) for c in client_ids]
    if len(ids) != m.n_clients:
        raise ValueError("client_ids length must match matrix size")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ids)
        for row in m.entries:
            writer.writerow([repr(float(v)) for v in row])
