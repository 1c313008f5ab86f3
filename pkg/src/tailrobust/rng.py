"""Seeded random streams keyed by (seed, experiment, replication, ...).

Streams use the counter-based Philox bit generator. Each key tuple maps to
an independent stream, so replications and methods can be evaluated in any
order and still see identical random numbers.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(part):
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream keys must be nonnegative")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed, *keys) -> np.random.Generator:
    """Return the generator for stream ``keys`` under root ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed or generator is required")
    return stream(seed)
