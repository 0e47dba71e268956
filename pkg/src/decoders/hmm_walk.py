"""Random walks over compound states (check, bit pair) that define one HMM chain."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import logging
from typing import Any, Literal, Sequence

import numpy as np
import numpy.typing as npt

from src.core.errors import WalkStalled
from src.core.ldpc_code import ParityCheckMatrix
from src.core.seeding import SeedKey, make_rng


logger = logging.getLogger(__name__)

LENGTH_CAP_FACTOR = 20
UNVISITED_BIAS = 0.9

RepeatRule = Literal["occurrence", "revisit"]


@dataclass(frozen=True)
class WalkStep:
    check_index: int
    first_bit: int
    second_bit: int
    adjacent_checks_first: tuple[int, ...]
    adjacent_checks_second: tuple[int, ...]

    @classmethod
    def build(cls, H: ParityCheckMatrix, check: int, first: int, second: int) -> "WalkStep":
        return cls(
            check_index=check,
            first_bit=first,
            second_bit=second,
            adjacent_checks_first=tuple(c for c in H.var_supports[first] if c != check),
            adjacent_checks_second=tuple(c for c in H.var_supports[second] if c != check),
        )


@dataclass(frozen=True)
class Walk:
    steps: tuple[WalkStep, ...]
    visit_counts: tuple[int, ...]

    @classmethod
    def from_steps(cls, steps: Sequence[WalkStep], n_vars: int) -> "Walk":
        counts = [0] * n_vars
        for step in steps:
            counts[step.first_bit] += 1
            counts[step.second_bit] += 1
        return cls(steps=tuple(steps), visit_counts=tuple(counts))

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def n_vars(self) -> int:
        return len(self.visit_counts)

    @cached_property
    def checks(self) -> npt.NDArray[np.int64]:
        return np.array([step.check_index for step in self.steps], dtype=np.int64)

    @cached_property
    def first(self) -> npt.NDArray[np.int64]:
        return np.array([step.first_bit for step in self.steps], dtype=np.int64)

    @cached_property
    def second(self) -> npt.NDArray[np.int64]:
        return np.array([step.second_bit for step in self.steps], dtype=np.int64)

    def covers_all(self) -> bool:
        return all(count > 0 for count in self.visit_counts)


def generate_walk(H: ParityCheckMatrix, seed: SeedKey, length_cap: int | None = None) -> Walk:
    """Walk the compound states until every variable has been a state bit.

    From the current second bit j the walk moves to a random other check
    containing j (the same check only if j is in no other check) and picks the
    next second bit from that check, preferring unvisited variables.
    """
    rng = make_rng(seed)
    cap = length_cap or LENGTH_CAP_FACTOR * H.n_vars
    check = int(rng.integers(H.n_checks))
    support = H.check_supports[check]
    if len(support) < 2:
        raise WalkStalled(f"check {check} has fewer than two variables")
    first, second = (int(v) for v in rng.choice(support, size=2, replace=False))

    steps = [WalkStep.build(H, check, first, second)]
    visited = np.zeros(H.n_vars, dtype=bool)
    visited[[first, second]] = True
    covered = 2

    while covered < H.n_vars:
        if len(steps) >= cap:
            raise WalkStalled(f"walk reached {cap} steps with {covered}/{H.n_vars} variables covered")
        shared = second
        others = [c for c in H.var_supports[shared] if c != check]
        if others:
            check = others[int(rng.integers(len(others)))]
        candidates = [v for v in H.check_supports[check] if v != shared]
        if not candidates:
            raise WalkStalled(f"check {check} offers no partner for variable {shared}")
        fresh = [v for v in candidates if not visited[v]]
        pool = fresh if fresh and rng.random() < UNVISITED_BIAS else candidates
        second = pool[int(rng.integers(len(pool)))]
        steps.append(WalkStep.build(H, check, shared, second))
        if not visited[second]:
            visited[second] = True
            covered += 1

    return Walk.from_steps(steps, H.n_vars)


def repeat_mask(walk: Walk, rule: RepeatRule = "occurrence") -> npt.NDArray[np.bool_]:
    """(L, 2) mask of state-bit occurrences whose variable appeared at an earlier step.

    Under "occurrence" the bit shared with the previous step always counts as a
    repeat; under "revisit" only variables re-entering the walk are flagged.
    """
    mask = np.zeros((len(walk), 2), dtype=bool)
    seen: set[int] = set()
    for k, step in enumerate(walk.steps):
        mask[k, 0] = step.first_bit in seen and (rule == "occurrence" or k == 0)
        mask[k, 1] = step.second_bit in seen
        seen.update((step.first_bit, step.second_bit))
    return mask


def repeated_positions(walk: Walk, rule: RepeatRule = "occurrence") -> set[int]:
    """Step indices with at least one repeated state bit."""
    return {int(k) for k in np.flatnonzero(repeat_mask(walk, rule).any(axis=1))}


def walk_to_json(walk: Walk) -> list[dict[str, Any]]:
    return [
        {"check": step.check_index, "i": step.first_bit, "j": step.second_bit}
        for step in walk.steps
    ]
