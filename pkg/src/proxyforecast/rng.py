"""Seeded random streams.

Every generator is a NumPy ``PCG64`` bit generator seeded through a
``SeedSequence``. Substreams are keyed by a tuple of non-negative integers
(e.g. ``(trial, forecaster)``), so a trial's draws do not depend on how many
other trials run or in which order.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "PCG64"
DEFAULT_SEED = 20190101


def make_rng(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit integer seed for substream ``key`` of ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(2, dtype=np.uint32).astype(np.uint64) @ np.array([1 << 31, 1], dtype=np.uint64))
