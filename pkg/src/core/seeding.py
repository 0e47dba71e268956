"""Reproducible random streams keyed by integer tuples.

Every frame, walk and construction attempt draws from its own stream derived
from a key such as (master_seed, point, frame, purpose, walk). Streams are
never shared, so results do not depend on evaluation order or worker count.
"""
from __future__ import annotations

from typing import Sequence, Union

import numpy as np

SeedKey = Union[int, Sequence[int]]

_MASK64 = (1 << 64) - 1


def as_key(seed: SeedKey) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(part) for part in seed)


def seed_sequence(seed: SeedKey) -> np.random.SeedSequence:
    return np.random.SeedSequence([part & _MASK64 for part in as_key(seed)])


def make_rng(seed: SeedKey | np.random.Generator) -> np.random.Generator:
    """PCG64 generator for a key; generators are passed through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed_sequence(seed))


def derive_seed(seed: SeedKey) -> int:
    """Collapse a key into a single 64-bit seed."""
    return int(seed_sequence(seed).generate_state(1, dtype=np.uint64)[0])
