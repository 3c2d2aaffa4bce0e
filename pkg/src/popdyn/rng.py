"""Seeded random streams.

Every trajectory, setting and training run draws from its own Philox4x64
stream (a counter-based generator) keyed by ``SeedSequence(seed,
spawn_key=key)``. Streams depend only on ``(seed, key)``, never on the
order or the worker a task runs on.
"""
from __future__ import annotations

import os

import numpy as np

__all__ = ["stream", "as_generator", "worker_count"]

# key namespaces so that different uses of one seed never share a stream
SETTING = 1
TRAJECTORY = 2
HIDDEN = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return stream(seed)


def worker_count(requested: int | None = None) -> int:
    """Number of worker processes, capped by ``POPDYN_THREADS``."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("POPDYN_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)
