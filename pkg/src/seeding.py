"""
Seed discipline

All randomness flows through PCG64 generators. The stream for
``(seed, k1, ..., kr)`` is ``SeedSequence(entropy=seed, spawn_key=(k1, ..., kr))``,
so a run is reproducible from its top-level seed and its position
(trial, attempt, phase, ...).
"""

from typing import Union

import numpy as np

RngLike = Union[int, np.random.Generator, None]


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *keys)"""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(sequence))


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit integer seed for the stream (seed, *keys)"""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def as_rng(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(0 if rng is None else rng)
