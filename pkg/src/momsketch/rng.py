"""Seeded random streams.

Every stream is a Philox (counter-based) generator keyed by a tuple of
integers, so any (seed, trial, purpose) triple can be replayed on its own.
"""

from __future__ import annotations

import numpy as np

SKETCH_STREAM = 0
COORD_STREAM = 1
DATA_STREAM = 2


def make_rng(seed: int | None, *stream: int) -> np.random.Generator:
    if seed is None:
        seed = 0
    ss = np.random.SeedSequence([int(seed), *map(int, stream)])
    return np.random.Generator(np.random.Philox(ss))
