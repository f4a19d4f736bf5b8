"""Named, hash-derived random streams.

All randomness flows from one integer seed. A stream is identified by the
seed plus a path of keys (strings or ints), e.g. ``stream(seed, "bootstrap", 3)``.
Keys are hashed into a :class:`numpy.random.SeedSequence` spawn key, so
streams are independent of the order in which they are requested.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("stream keys must be non-negative")
        return int(key)
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(seed: int, *keys) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed) & (2**64 - 1),
                                  spawn_key=tuple(_key_to_int(k) for k in keys))


def stream(seed: int, *keys) -> np.random.Generator:
    """Return a generator for the sub-stream ``keys`` of ``seed``."""
    return np.random.default_rng(seed_sequence(seed, *keys))


def derive_seed(seed: int, *keys) -> int:
    """A 63-bit integer seed for the sub-stream, for APIs that take ints."""
    return int(seed_sequence(seed, *keys).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
