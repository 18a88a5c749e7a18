"""Deterministic seed derivation.

Every random stream is addressed by a path below the root seed, e.g.
``rng(seed, "trial", 3, "step", 2)``. Paths are hashed into the spawn key of a
``numpy.random.SeedSequence`` so the same path always yields the same stream,
independent of execution order or worker count.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def seed_sequence(seed: int, *path) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(p) for p in path))


def rng(seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *path))


def child_seed(seed: int, *path) -> int:
    """A 64-bit integer seed for a sub-tree, for APIs that take plain ints."""
    return int(seed_sequence(seed, *path).generate_state(1, dtype=np.uint64)[0])
