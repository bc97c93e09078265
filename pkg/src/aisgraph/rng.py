"""Keyed random streams.

Each unit of work (a focal window, a graph group, the dataset-level
selection) gets its own generator derived from the global seed and the
unit's key, so results do not depend on processing order or worker count.
"""

from __future__ import annotations

import numpy as np

# stream purposes
SYNTHESIS = 1
INJECTION = 2
SELECTION = 3


def keyed_rng(seed: int, purpose: int, *key: int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, int(purpose)] + [int(k) & 0xFFFFFFFFFFFFFFFF for k in key]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
