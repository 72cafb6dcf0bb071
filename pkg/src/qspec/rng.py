"""Named random sub-streams derived from a single master seed.

Each stream is a counter-based child of the master ``SeedSequence``, so the
draws for one purpose (e.g. sampled times) never shift when another purpose
(e.g. shot noise) is switched on or off, and chunked work can spawn its own
stream by index independently of scheduling.
"""

from __future__ import annotations

import numpy as np

STREAMS = {"times": 0, "shots": 1, "noise": 2, "model": 3, "fixture": 4}


def substream(seed: int, name: str, *index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[name], *index)))
