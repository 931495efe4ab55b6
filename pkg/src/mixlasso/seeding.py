"""Deterministic seed derivation for independent random streams.

Every stochastic routine in the package takes an explicit integer seed.
Sub-streams (per replicate, per design row, per restart) derive their own
seeds from the parent seed plus a path of small integers, so results are
identical no matter in which order the sub-streams are consumed.
"""

import numpy as np

# Stream tags keep unrelated sub-streams of one parent seed disjoint.
STREAM_TRUTH = 1
STREAM_DESIGN = 2
STREAM_RESPONSES = 3
STREAM_FIT = 4
STREAM_KL = 5
STREAM_RESTART = 6
STREAM_REINIT = 7
STREAM_ROW = 8
STREAM_INIT = 9
STREAM_WARM = 10


def child_seed(seed: int, *path: int) -> int:
    """Derive a 63-bit child seed from ``seed`` and an integer path.

    The derivation is a pure function of ``(seed, path)``, so independent
    consumers can derive the same child without sharing generator state.
    """
    ss = np.random.SeedSequence([int(seed) & (2**63 - 1), *[int(x) for x in path]])
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Generator seeded by :func:`child_seed` of ``(seed, path)``."""
    return np.random.default_rng(child_seed(seed, *path))
