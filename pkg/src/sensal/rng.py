"""Deterministic, domain-separated random streams.

Every source of randomness in the package is a counter-based Philox
generator keyed by (seed, purpose, *path). Identical keys produce
identical sequences on every platform, so dropout masks, shuffles and
splits do not depend on evaluation order or thread schedule.
"""

import numpy as np

# Purpose tags keep unrelated consumers of the same seed independent.
INIT = 1
TRAIN_SHUFFLE = 2
TRAIN_DROPOUT = 3
MC_PASS = 4
SPLIT = 5
RANDOM_SCORE = 6
SYNTH = 7
ORACLE_NOISE = 8


def stream(seed: int, *path: int) -> np.random.Generator:
    """Generator keyed by (seed, *path); same key, same sequence."""
    key = [int(seed)] + [int(p) for p in path]
    return np.random.Generator(np.random.Philox(key=_mix(key)))


def _mix(key: list[int]) -> np.ndarray:
    # Philox takes a 2-word key; fold arbitrary-length paths into it with
    # a splitmix64-style permutation so (5, 1) and (5, 0, 1) differ.
    words = np.zeros(2, dtype=np.uint64)
    state = np.uint64(0x9E3779B97F4A7C15)
    for i, k in enumerate(key):
        with np.errstate(over="ignore"):
            z = np.uint64(k & 0xFFFFFFFFFFFFFFFF) + state * np.uint64(i + 1)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            z = z ^ (z >> np.uint64(31))
            words[i % 2] ^= z
            state = z
    return words
