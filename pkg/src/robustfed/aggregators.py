"""Comparison aggregation rules behind one common interface.

Average, coordinate-wise median, coordinate-wise trimmed mean, smoothed
Weiszfeld geometric median, Krum, and centered clipping, plus the
nearest-neighbor-mixing pre-aggregation step that can prefix any of them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GradientSet, neighbor_order, pairwise_sq_distances
from .prodigy import ProdigyParams, TrustScores, prodigy_aggregate

AGGREGATOR_KINDS = ("average", "median", "trimmed_mean", "geomed", "krum", "cclip", "prodigy")


@dataclass
class AggregatorSpec:
    """Which rule to run and its parameters; defaults follow common practice.

    trim_q defaults to the configured byzantine count when left as None.
    """

    kind: str = "average"
    trim_q: int | None = None
    weiszfeld_nu: float = 0.1
    weiszfeld_rounds: int = 3
    clip_tau: float = 10.0
    clip_iters: int = 3
    nnm_enabled: bool = False

    def __post_init__(self):
        if self.kind not in AGGREGATOR_KINDS:
            raise ValueError(f"unknown aggregator kind {self.kind!r}, expected one of {AGGREGATOR_KINDS}")
        if self.weiszfeld_nu <= 0:
            raise ValueError("weiszfeld_nu must be positive")
        if self.weiszfeld_rounds < 1:
            raise ValueError("weiszfeld_rounds must be at least 1")
        if self.clip_tau <= 0:
            raise ValueError("clip_tau must be positive")
        if self.clip_iters < 1:
            raise ValueError("clip_iters must be at least 1")

    def label(self) -> str:
        return ("nnm+" if self.nnm_enabled else "") + self.kind


@dataclass
class AggregatorState:
    """Warm-start carried across rounds; only centered clipping reads it."""

    prev_aggregate: np.ndarray | None = None


@dataclass
class AggregationResult:
    vector: np.ndarray
    trust: TrustScores | None = None


def average(g: GradientSet) -> np.ndarray:
    """Arithmetic mean of the client updates."""
    return g.vectors.mean(axis=0)


def coordinate_median(g: GradientSet) -> np.ndarray:
    """Per-coordinate median; even counts use the midpoint of the two middle values."""
    return np.median(g.vectors, axis=0)


def trimmed_mean(g: GradientSet, q: int) -> np.ndarray:
    """Per-coordinate mean after dropping the q largest and q smallest values."""
    n = g.n_clients
    if q < 0:
        raise ValueError("trim count must be nonnegative")
    if n - 2 * q < 1:
        raise ValueError(f"trim count q={q} leaves no values out of N={n}")
    if q == 0:
        return average(g)
    ordered = np.sort(g.vectors, axis=0)
    return ordered[q : n - q].mean(axis=0)


def geometric_median(g: GradientSet, nu: float, rounds: int) -> np.ndarray:
    """Smoothed Weiszfeld iteration started at the arithmetic mean.

    Residual norms are clamped below by nu so the weights stay finite when an
    iterate lands on an input point.
    """
    if nu <= 0 or rounds < 1:
        raise ValueError("need nu > 0 and rounds >= 1")
    v = g.vectors.mean(axis=0)
    for _ in range(rounds):
        residual_norms = np.linalg.norm(g.vectors - v, axis=1)
        weights = 1.0 / np.maximum(nu, residual_norms)
        v = (weights @ g.vectors) / weights.sum()
    return v


def krum(g: GradientSet, f: int) -> np.ndarray:
    """Update of the client with the smallest summed squared distance to its
    N-f-2 nearest peers; score ties resolve to the lower client index."""
    n = g.n_clients
    if f < 0:
        raise ValueError("byzantine count must be nonnegative")
    if n < f + 3:
        raise ValueError(f"krum needs N >= f + 3, got N={n}, f={f}")
    order = neighbor_order(pairwise_sq_distances(g))
    scores = order.distances[:, : n - f - 2].sum(axis=1)
    return g.vectors[int(np.argmin(scores))].copy()


def centered_clip(g: GradientSet, state: AggregatorState | None, tau: float, iters: int) -> np.ndarray:
    """Iteratively move the previous aggregate by clipped client residuals.

    The start point is the previous round's aggregate (zero before round 0);
    zero residuals contribute zero regardless of the clip factor.
    """
    if tau <= 0 or iters < 1:
        raise ValueError("need tau > 0 and iters >= 1")
    if state is not None and state.prev_aggregate is not None:
        center = np.array(state.prev_aggregate, dtype=np.float64)
    else:
        center = np.zeros(g.dim)
    for _ in range(iters):
        residuals = g.vectors - center
        norms = np.linalg.norm(residuals, axis=1)
        factors = np.ones(g.n_clients)
        over = norms > tau
        factors[over] = tau / norms[over]
        center = center + (factors[:, None] * residuals).mean(axis=0)
    return center


def nnm_mix(g: GradientSet, f: int) -> GradientSet:
    """Replace each update with the mean of itself and its N-f-1 nearest peers."""
    n = g.n_clients
    if f < 0:
        raise ValueError("byzantine count must be nonnegative")
    if n - f < 1:
        raise ValueError(f"mixing needs N - f >= 1, got N={n}, f={f}")
    order = neighbor_order(pairwise_sq_distances(g))
    mixed = np.empty_like(g.vectors)
    for k in range(n):
        members = np.concatenate(([k], order.indices[k, : n - f - 1]))
        mixed[k] = g.vectors[members].mean(axis=0)
    return GradientSet(mixed, g.client_ids.copy())


class Aggregator:
    """AggregatorSpec bound to the run's client counts, callable per round.

    Pure given (GradientSet, state snapshot); the training loop owns the
    state and updates it between rounds.
    """

    def __init__(self, spec: AggregatorSpec, n_clients: int, n_byzantine: int):
        self.spec = spec
        self.n_clients = n_clients
        self.n_byzantine = n_byzantine
        self.trim_q = spec.trim_q if spec.trim_q is not None else n_byzantine
        if spec.kind == "trimmed_mean" and n_clients - 2 * self.trim_q < 1:
            raise ValueError(
                f"trimmed_mean with q={self.trim_q} leaves no values out of N={n_clients}"
            )
        if spec.kind == "krum" and n_clients < n_byzantine + 3:
            raise ValueError(f"krum needs N >= f + 3, got N={n_clients}, f={n_byzantine}")
        if spec.kind == "prodigy":
            # validates 1 <= f < N/2 up front
            ProdigyParams(n_clients, n_byzantine)
        if spec.nnm_enabled and n_clients - n_byzantine < 1:
            raise ValueError("nnm mixing needs N - f >= 1")

    def __call__(self, g: GradientSet, state: AggregatorState | None = None) -> AggregationResult:
        if g.n_clients != self.n_clients:
            raise ValueError(f"expected {self.n_clients} updates, got {g.n_clients}")
        if self.spec.nnm_enabled:
            g = nnm_mix(g, self.n_byzantine)
        kind = self.spec.kind
        if kind == "average":
            return AggregationResult(average(g))
        if kind == "median":
            return AggregationResult(coordinate_median(g))
        if kind == "trimmed_mean":
            return AggregationResult(trimmed_mean(g, self.trim_q))
        if kind == "geomed":
            return AggregationResult(
                geometric_median(g, self.spec.weiszfeld_nu, self.spec.weiszfeld_rounds)
            )
        if kind == "krum":
            return AggregationResult(krum(g, self.n_byzantine))
        if kind == "cclip":
            return AggregationResult(
                centered_clip(g, state, self.spec.clip_tau, self.spec.clip_iters)
            )
        vector, trust = prodigy_aggregate(g, ProdigyParams(self.n_clients, self.n_byzantine))
        return AggregationResult(vector, trust)
