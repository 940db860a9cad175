"""Deterministic substream derivation for reproducible Monte Carlo."""

from __future__ import annotations

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator derived from (seed, key...) by seed-sequence spawning.

    Results depend only on the key tuple, never on call order or scheduling.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
