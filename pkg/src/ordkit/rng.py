"""Named child-seed derivation.

Every randomized stage of the pipeline (splitting, overlap detection,
generator fit, sampling, classifier training) draws its own generator from
the run seed plus a stage name, so adding, removing, or reordering stages
never perturbs the randomness of the others. Names hash through crc32,
which is stable across platforms and Python versions.
"""

from __future__ import annotations

import zlib

import numpy as np


def child_seed(seed: int, *names) -> int:
    """Derive a 64-bit seed from ``seed`` and a path of stage names."""
    key = tuple(zlib.crc32(str(n).encode("utf-8")) for n in names)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def child_rng(seed: int, *names) -> np.random.Generator:
    """A ``numpy.random.Generator`` seeded by ``child_seed(seed, *names)``."""
    return np.random.default_rng(child_seed(seed, *names))
