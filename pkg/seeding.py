"""Derived random streams.

Every random draw in the library comes from a generator derived from a master
seed and a tuple of integer keys (trial indices plus a stream role). The
derivation goes through ``numpy.random.SeedSequence`` spawn keys, so the
stream for a given key tuple is independent of the order in which trials are
scheduled or of how many workers run them.
"""
from enum import IntEnum
from typing import Tuple

import numpy as np

MAX_SEED = 2**64 - 1


class Stream(IntEnum):
    """Roles of the independent random streams."""
    OPERATOR = 0
    SIGNAL = 1
    SUPPORT = 2
    OUTLIER_VALUES = 3
    INIT = 4
    PROBE = 5
    IMAGE = 6
    TRIAL = 7


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if seed < 0 or seed > MAX_SEED:
        raise ValueError(f"Seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    """Return the seed sequence for ``seed`` refined by ``keys``."""
    spawn_key: Tuple[int, ...] = tuple(int(k) for k in keys)
    if any(k < 0 for k in spawn_key):
        raise ValueError(f"Stream keys must be non-negative, got {spawn_key}")
    return np.random.SeedSequence(entropy=_check_seed(seed), spawn_key=spawn_key)


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *keys)``."""
    return np.random.default_rng(seed_sequence(seed, *keys))


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit child seed, for passing derived seeds across process boundaries."""
    state = seed_sequence(seed, *keys).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
