"""Keyed random substreams.

Every stochastic task draws from a generator derived from the run seed and a
tuple of integer keys, so results never depend on scheduling order.
"""
import zlib

import numpy as np


def key_of(name):
    """Stable non-negative integer for a string key."""
    return zlib.crc32(str(name).encode("utf-8"))


def substream(seed, *keys):
    keys = tuple(key_of(k) if isinstance(k, str) else int(k) for k in keys)
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=keys)
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng(0)
    return substream(int(rng))


def draw_seed(rng):
    """A 63-bit seed for compiled kernels that run their own generator."""
    return int(rng.integers(1, 2**63 - 1))
