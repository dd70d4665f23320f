"""Seed expansion: one integer seed, many independent counter-based streams."""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the stream labelled ``key`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


# Stream labels, kept distinct so components never share draws.
LEARNING = 0
DATA = 1
NOISE = 2
M_SAMPLES = 3
SPSA_DELTA = 4
SPSA_COST = 5
MONTE_CARLO = 6
