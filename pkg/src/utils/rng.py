from __future__ import annotations

import hashlib
from typing import Union

import numpy as np

Key = Union[int, str]


def stable_int(value: Key) -> int:
    """
    Maps a string or int to a non-negative 64-bit integer, stable across
    processes (unlike the builtin hash of str).
    """
    if isinstance(value, int):
        return value & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2b(value.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, *keys: Key) -> int:
    """
    Child seed for a named sub-stream of `seed`.
    """
    sequence = np.random.SeedSequence(entropy=stable_int(seed), spawn_key=tuple(stable_int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def stream(seed: int, *keys: Key) -> np.random.Generator:
    """
    Counter-based generator: the stream for (seed, *keys) never depends on
    how many other streams were drawn before it.
    """
    sequence = np.random.SeedSequence(entropy=stable_int(seed), spawn_key=tuple(stable_int(k) for k in keys))
    return np.random.Generator(np.random.Philox(sequence))
