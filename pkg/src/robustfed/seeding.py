"""Deterministic RNG derivation for data generation and per-client streams."""

from __future__ import annotations

import hashlib

import numpy as np


def _as_entropy(key) -> int:
    """Map an int or string key to a nonnegative 64-bit entropy word."""
    if isinstance(key, (bool, float)):
        raise TypeError(f"seed keys must be int or str, got {type(key).__name__}")
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    if isinstance(key, str):
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"seed keys must be int or str, got {type(key).__name__}")


def derived_rng(*keys) -> np.random.Generator:
    """Generator uniquely determined by the key tuple, independent across tuples."""
    return np.random.default_rng(np.random.SeedSequence([_as_entropy(k) for k in keys]))


def stream_id(*keys) -> int:
    """Stable 64-bit stream identifier; counter-based streams derive from it."""
    seq = np.random.SeedSequence([_as_entropy(k) for k in keys])
    return int(seq.generate_state(1, dtype=np.uint64)[0])
