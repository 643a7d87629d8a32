"""Central registry of deterministic RNG streams.

Every stochastic component draws from np.random.SeedSequence([seed, stream, key])
so runs are reproducible and two components never consume the same stream even
when keyed by the same frame index.
"""

from __future__ import annotations

import numpy as np

STREAM_SENSOR_DEPTH_NEXT = 1
STREAM_SENSOR_DEPTH_CURR = 2
STREAM_DREAM_CROSS = 3
STREAM_DREAM_INPAINT = 4
STREAM_SENSOR_DROPOUT_NEXT = 5
STREAM_SENSOR_DROPOUT_CURR = 6
STREAM_WORLDGEN = 7


def stream_rng(seed: int, stream: int, key: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=[int(seed), int(stream), int(key)]))
