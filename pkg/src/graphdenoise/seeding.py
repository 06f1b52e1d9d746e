"""Deterministic random-stream derivation from a single root seed."""

import numpy as np


def spawn_rng(root_seed, *key):
    """Return an independent generator keyed by (root_seed, *key).

    The same key always yields the same stream, so a whole run is
    reproducible from one integer regardless of how many components
    draw randomness or in which order they are scheduled.
    """
    key = tuple(int(k) for k in key)
    if any(k < 0 for k in key):
        raise ValueError(f"stream key must be non-negative, got {key}")
    return np.random.default_rng(np.random.SeedSequence(int(root_seed), spawn_key=key))
