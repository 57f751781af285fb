"""Deterministic random streams.

Every stochastic routine in the package draws from a counter-based Philox
generator keyed by (master seed, stream indices).  Two runs with the same
seed and stream tuple produce identical draws on any platform; distinct
stream tuples give statistically independent streams, so trials can be laid
out in any order (or farmed out) without changing results.
"""
from __future__ import annotations

import numpy as np


def make_generator(seed: int, *stream: int) -> np.random.Generator:
    """Return a Philox-backed Generator for the given (seed, stream...) key."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))
