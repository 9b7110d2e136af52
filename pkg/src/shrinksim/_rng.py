"""Keyed, non-mutating derivation of independent RNG streams."""

from __future__ import annotations

import numpy as np


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def child(seed, *keys: int) -> np.random.SeedSequence:
    """Stream identified by ``keys`` under ``seed``.

    Unlike ``SeedSequence.spawn`` this does not depend on how many children
    were drawn before, so the mapping key -> stream is fixed.
    """
    parent = as_seed_sequence(seed)
    return np.random.SeedSequence(
        entropy=parent.entropy,
        spawn_key=tuple(parent.spawn_key) + tuple(int(k) for k in keys),
        pool_size=parent.pool_size,
    )
