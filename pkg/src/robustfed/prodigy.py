"""Dual-score trust aggregation: proximity x dissimilarity scoring with
threshold filtering and trust-weighted averaging.

Each client gets a proximity score (inverse of its window-trimmed neighbor
distance sum) and a dissimilarity score (coefficient of variance of its
self-inclusive nearest neighborhood). The f lowest composite scores are
zeroed and the remaining clients are averaged with their scores as weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    GradientSet,
    NeighborOrder,
    neighbor_order,
    pairwise_sq_distances,
    vector_set_stats,
)


class DegenerateRoundError(RuntimeError):
    """Every trust score reached zero; there is no safe aggregate this round.

    Only possible under composite-score ties at the threshold. Callers must
    treat the round as a no-op model update rather than fall back to an
    unprotected rule.
    """

    def __init__(self, scores: "TrustScores"):
        super().__init__("all clients filtered: trust scores sum to zero")
        self.scores = scores


@dataclass(frozen=True)
class ProdigyParams:
    """Client counts and the denominator clamp for the scoring pipeline."""

    n_clients: int
    n_byzantine: int
    epsilon_guard: float = 1e-12

    def __post_init__(self):
        n, f = self.n_clients, self.n_byzantine
        if f < 1:
            raise ValueError(f"need at least one presumed byzantine client, got f={f}")
        if 2 * f >= n:
            raise ValueError(f"adversarial model requires f < N/2, got N={n}, f={f}")
        if self.epsilon_guard <= 0:
            raise ValueError("epsilon_guard must be positive")


@dataclass
class TrustScores:
    """Per-client score breakdown from one aggregation round."""

    proximity: np.ndarray
    dissimilarity: np.ndarray
    composite: np.ndarray
    final: np.ndarray
    threshold: float

    def to_dict(self) -> dict:
        return {
            "proximity": [float(v) for v in self.proximity],
            "dissimilarity": [float(v) for v in self.dissimilarity],
            "composite": [float(v) for v in self.composite],
            "final": [float(v) for v in self.final],
            "threshold": float(self.threshold),
        }


def _check_order(order: NeighborOrder, p: ProdigyParams) -> None:
    if order.n_clients != p.n_clients:
        raise ValueError(
            f"neighbor order built from {order.n_clients} clients, params say {p.n_clients}"
        )


def proximity_scores(order: NeighborOrder, p: ProdigyParams) -> np.ndarray:
    """Inverse of the summed mid-ranked neighbor distances.

    The sum runs over sorted ranks f..N-f-1 (1-based among the N-1 neighbors),
    skipping the f-1 nearest (anti-collusion) and f farthest (anti-outlier).
    """
    _check_order(order, p)
    f = p.n_byzantine
    window = order.distances[:, f - 1 : order.n_clients - f - 1]
    return 1.0 / (window.sum(axis=1) + p.epsilon_guard)


def dissimilarity_scores(g: GradientSet, order: NeighborOrder, p: ProdigyParams) -> np.ndarray:
    """Coefficient of variance of each client's f-member nearest neighborhood.

    The neighborhood is self-inclusive: the client plus its f-1 nearest peers.
    For f=1 the neighborhood is the client alone and the ratio degenerates to
    zero everywhere, so the score is defined as 1 (pure proximity filtering).
    """
    _check_order(order, p)
    n, f = p.n_clients, p.n_byzantine
    if f == 1:
        return np.ones(n)
    scores = np.empty(n)
    for k in range(n):
        members = np.concatenate(([k], order.indices[k, : f - 1]))
        stats = vector_set_stats(g.vectors[members])
        scores[k] = stats.spread / (float(np.linalg.norm(stats.mean)) + p.epsilon_guard)
    return scores


def prodigy_aggregate(g: GradientSet, p: ProdigyParams) -> tuple[np.ndarray, TrustScores]:
    """Score all clients, zero out the f lowest composites, average the rest.

    The threshold equals the f-th smallest composite score (ties toward the
    lower client index) and the comparison is inclusive, so at least f clients
    are always filtered. Raises DegenerateRoundError if nothing survives.
    """
    if g.n_clients != p.n_clients:
        raise ValueError(f"got {g.n_clients} updates, params say N={p.n_clients}")
    order = neighbor_order(pairwise_sq_distances(g))
    s_p = proximity_scores(order, p)
    s_d = dissimilarity_scores(g, order, p)
    composite = s_p * s_d

    ranking = np.lexsort((np.arange(p.n_clients), composite))
    threshold = float(composite[ranking[p.n_byzantine - 1]])
    final = np.where(composite <= threshold, 0.0, composite)

    scores = TrustScores(
        proximity=s_p,
        dissimilarity=s_d,
        composite=composite,
        final=final,
        threshold=threshold,
    )
    # Summing in weight-sorted order makes the output a function of the score
    # multiset alone, so relabeling clients cannot perturb even the last bit.
    canonical = np.argsort(final, kind="stable")
    total = final[canonical].sum()
    if total == 0.0:
        raise DegenerateRoundError(scores)
    weighted = final[canonical, None] * g.vectors[canonical]
    aggregate = weighted.sum(axis=0) / total
    return aggregate, scores
