"""Splittable seed derivation.

Every random draw in a scenario gets its own integer seed derived from
the master seed through a numpy SeedSequence spawn key, so adding
replicates, iterations, or schemes never perturbs the streams of earlier
ones. The spawn-key layout is:

    (replicate,)                         replicate root
    (replicate, purpose, *extra)         e.g. per-iteration noise

with the purpose indices below.
"""

from __future__ import annotations

import numpy as np

FIELD = 0
DEPLOY = 1
PROBE = 2
SPATIAL_NOISE = 3
TEMPORAL_NOISE = 4


def replicate_root(master_seed: int, replicate: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(replicate,))


def subseed(root: np.random.SeedSequence, *key: int) -> int:
    """Integer seed for the child stream at ``key`` under ``root``."""
    child = np.random.SeedSequence(
        entropy=root.entropy, spawn_key=tuple(root.spawn_key) + tuple(int(k) for k in key)
    )
    return int(child.generate_state(1, dtype=np.uint64)[0])
