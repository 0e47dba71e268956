"""Compound-state HMM decoder: emissions, forward-backward smoothing and decision feedback.

Basic states are ordered (0,0), (0,1), (1,0), (1,1) for the bit pair (d_i, d_j)
of one walk step. Consecutive steps share a bit: the second bit of step k is
the first bit of step k+1.
"""
from __future__ import annotations

from dataclasses import dataclass
import logging
from typing import Literal, Sequence

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from src.core.channel import LLR_MAX, hard_decision, saturate
from src.core.errors import DegreeMismatch, NumericalUnderflow, UncoveredVariable, WalkStalled
from src.core.ldpc_code import ParityCheckMatrix, syndrome
from src.core.seeding import SeedKey, as_key, make_rng
from src.decoders.hmm_walk import RepeatRule, Walk, WalkStep, generate_walk, repeat_mask
from src.decoders.parity import CheckProducts, even_odd_sums, parity_bias
from src.utils.validators import ensure_positive, ensure_real_vector


logger = logging.getLogger(__name__)

EmissionMode = Literal["simple", "extended"]

STATE_BITS: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))
N_STATES = 4
MAX_WALK_RETRIES = 5

TRANSITION_MATRIX = np.array(
    [
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.5, 0.5],
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.5, 0.5],
    ]
)
TRANSITION_MATRIX.setflags(write=False)


def transition_matrix() -> npt.NDArray[np.float64]:
    """T[(a,b) -> (a',b')] = 1/2 iff a' = b."""
    return TRANSITION_MATRIX.copy()


def sample_chain(
    T: npt.NDArray[np.float64], steps: int, seed: SeedKey
) -> npt.NDArray[np.int64]:
    """Draw a state sequence from T starting at a uniform state."""
    rng = make_rng(seed)
    states = np.empty(steps, dtype=np.int64)
    cumulative = np.cumsum(T, axis=1)
    uniforms = rng.random(steps)
    state = int(rng.integers(N_STATES))
    for k in range(steps):
        states[k] = state
        state = int(np.searchsorted(cumulative[state], uniforms[k], side="right"))
        state = min(state, N_STATES - 1)
    return states


@dataclass(frozen=True, eq=False)
class FbState:
    forward: npt.NDArray[np.float64]
    backward: npt.NDArray[np.float64]
    posteriors: npt.NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class HmmResult:
    llr_out: npt.NDArray[np.float64]
    decoded: bool
    iterations_used: int
    first_iteration_llrs: npt.NDArray[np.float64]
    unsatisfied_checks: int
    trace: tuple[npt.NDArray[np.float64], ...] = ()


@dataclass(frozen=True, eq=False)
class MultiwalkResult:
    result: HmmResult
    first_iteration_matrix: npt.NDArray[np.float64]
    best_output: npt.NDArray[np.float64]
    best_unsatisfied: int
    walks_used: int


def parity_constrained_sum(latent_probs: Sequence[float] | npt.ArrayLike, required_parity: int) -> float:
    """Probability mass of latent assignments whose XOR equals required_parity."""
    p = np.asarray(latent_probs, dtype=np.float64)
    if ((p < 0.0) | (p > 1.0)).any():
        raise ValueError("latent probabilities must lie in [0, 1]")
    sign = 1.0 if required_parity == 0 else -1.0
    return 0.5 * (1.0 + sign * float(np.prod(1.0 - 2.0 * p)))


def _adjacent_array(steps: Sequence[WalkStep], first: bool) -> npt.NDArray[np.int64]:
    rows = [step.adjacent_checks_first if first else step.adjacent_checks_second for step in steps]
    for k, row in enumerate(rows):
        if len(row) != 2:
            raise DegreeMismatch(
                f"state bit at step {k} has {len(row)} adjacent checks, extended emission needs 2"
            )
    return np.array(rows, dtype=np.int64).reshape(len(rows), 2)


def _adjacent_factor(
    adjacent: npt.NDArray[np.int64],
    bits: npt.NDArray[np.int64],
    q: npt.NDArray[np.float64],
    products: CheckProducts,
    state: npt.NDArray[np.float64],
    dedup: bool,
) -> npt.NDArray[np.float64]:
    """Per step and bit value d: product over adjacent checks of p(d) * P(others XOR to d)."""
    factor = np.ones((adjacent.shape[0], 2))
    for slot in range(adjacent.shape[1]):
        sums = even_odd_sums(products.excluding(adjacent[:, slot], q[bits]))
        factor *= sums if dedup else sums * state
    return factor


def _normalize_rows(values: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    totals = values.sum(axis=1, keepdims=True)
    uniform = np.full_like(values, 1.0 / values.shape[1])
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(totals > 0, values / totals, uniform)


def emission_columns(
    walk: Walk,
    llr: npt.ArrayLike,
    H: ParityCheckMatrix,
    mode: EmissionMode = "simple",
    repeats: npt.NDArray[np.bool_] | None = None,
    dedup: bool = False,
) -> npt.NDArray[np.float64]:
    """Normalized (L, 4) emission matrix for every step of the walk.

    `repeats` marks state-bit occurrences whose own probability is replaced by
    1/2. In extended mode each state bit's two other checks contribute a factor
    p_v(d_v) * P(rest of that check XORs to d_v); `dedup` drops the repeated
    p_v(d_v) factors.
    """
    evidence = saturate(llr)
    q = parity_bias(evidence)
    p_one = expit(evidence)
    p_zero = expit(-evidence)
    products = CheckProducts.from_vars(q, H)
    first, second = walk.first, walk.second

    state_first = np.stack([p_zero[first], p_one[first]], axis=1)
    state_second = np.stack([p_zero[second], p_one[second]], axis=1)
    if repeats is not None:
        state_first[repeats[:, 0]] = 0.5
        state_second[repeats[:, 1]] = 0.5

    latent = even_odd_sums(products.excluding(walk.checks, q[first], q[second]))
    column = np.empty((len(walk), N_STATES))
    for index, (a, b) in enumerate(STATE_BITS):
        column[:, index] = state_first[:, a] * state_second[:, b] * latent[:, a ^ b]

    if mode == "extended":
        around_first = _adjacent_factor(
            _adjacent_array(walk.steps, True), first, q, products, state_first, dedup
        )
        around_second = _adjacent_factor(
            _adjacent_array(walk.steps, False), second, q, products, state_second, dedup
        )
        column *= around_first[:, [0, 0, 1, 1]] * around_second[:, [0, 1, 0, 1]]
    elif mode != "simple":
        raise ValueError(f"unknown emission mode {mode!r}")

    return _normalize_rows(column)


def emission_simple(step: WalkStep, llr: npt.ArrayLike, H: ParityCheckMatrix) -> npt.NDArray[np.float64]:
    return emission_columns(Walk.from_steps([step], H.n_vars), llr, H, "simple")[0]


def emission_extended(
    step: WalkStep, llr: npt.ArrayLike, H: ParityCheckMatrix, dedup: bool = False
) -> npt.NDArray[np.float64]:
    return emission_columns(Walk.from_steps([step], H.n_vars), llr, H, "extended", dedup=dedup)[0]


def _scaled(vector: npt.NDArray[np.float64], normalize: bool) -> npt.NDArray[np.float64]:
    total = float(vector.sum())
    if not total > 0.0 or not np.isfinite(total):
        raise NumericalUnderflow("message mass vanished; enable normalization")
    return vector / total if normalize else vector


def forward_backward(
    emissions: npt.ArrayLike,
    T: npt.NDArray[np.float64] = TRANSITION_MATRIX,
    normalize: bool = True,
) -> FbState:
    """Smoothed state posteriors for a chain with a uniform initial distribution."""
    O = np.asarray(emissions, dtype=np.float64)
    if O.ndim != 2 or O.shape[0] < 1:
        raise ValueError("forward_backward needs at least one emission column")
    steps = O.shape[0]
    forward = np.empty_like(O)
    backward = np.empty_like(O)

    forward[0] = _scaled(np.full(O.shape[1], 1.0 / O.shape[1]) * O[0], normalize)
    for k in range(1, steps):
        forward[k] = _scaled(O[k] * (T.T @ forward[k - 1]), normalize)

    backward[-1] = _scaled(np.ones(O.shape[1]), normalize)
    for k in range(steps - 2, -1, -1):
        backward[k] = _scaled(T @ (O[k + 1] * backward[k + 1]), normalize)

    joint = forward * backward
    totals = joint.sum(axis=1, keepdims=True)
    if not (totals > 0).all():
        raise NumericalUnderflow("posterior mass vanished")
    return FbState(forward=forward, backward=backward, posteriors=joint / totals)


def _marginal_llr(p_one: npt.NDArray[np.float64], p_zero: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    with np.errstate(divide="ignore"):
        return np.clip(np.log(p_one) - np.log(p_zero), -LLR_MAX, LLR_MAX)


def posterior_to_llr(fb: FbState, walk: Walk, n_vars: int) -> npt.NDArray[np.float64]:
    """Mean of the bit-marginal LLRs over every occurrence of each variable."""
    post = fb.posteriors
    if post.shape[0] != len(walk):
        raise ValueError("posteriors and walk have different lengths")
    llr_first = _marginal_llr(post[:, 2] + post[:, 3], post[:, 0] + post[:, 1])
    llr_second = _marginal_llr(post[:, 1] + post[:, 3], post[:, 0] + post[:, 2])
    total = np.bincount(walk.first, weights=llr_first, minlength=n_vars) + np.bincount(
        walk.second, weights=llr_second, minlength=n_vars
    )
    counts = np.bincount(walk.first, minlength=n_vars) + np.bincount(walk.second, minlength=n_vars)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise UncoveredVariable(f"variables {missing[:10].tolist()} never appear in the walk")
    return saturate(total / counts)


def hmm_iterate(
    llr_channel: npt.ArrayLike,
    walk: Walk,
    iters: int,
    mode: EmissionMode,
    disable_repeats: bool,
    H: ParityCheckMatrix,
    *,
    repeat_rule: RepeatRule = "occurrence",
    dedup: bool = False,
    record_trace: bool = False,
) -> HmmResult:
    """Decision-feedback iterations on one fixed walk, stopping at a zero syndrome."""
    ensure_positive(iters, "iters")
    evidence = saturate(ensure_real_vector(llr_channel, H.n_vars, "llr_channel"))
    repeats = repeat_mask(walk, repeat_rule) if disable_repeats else None
    first_iteration: npt.NDArray[np.float64] | None = None
    trace: list[npt.NDArray[np.float64]] = []
    unsatisfied = H.n_checks

    for iteration in range(1, iters + 1):
        emissions = emission_columns(walk, evidence, H, mode, repeats, dedup)
        evidence = posterior_to_llr(forward_backward(emissions), walk, H.n_vars)
        if first_iteration is None:
            first_iteration = evidence.copy()
        if record_trace:
            trace.append(evidence.copy())
        unsatisfied = int(syndrome(hard_decision(evidence), H).sum())
        if unsatisfied == 0:
            return HmmResult(evidence, True, iteration, first_iteration, 0, tuple(trace))

    assert first_iteration is not None
    return HmmResult(evidence, False, iters, first_iteration, unsatisfied, tuple(trace))


def draw_walk(H: ParityCheckMatrix, key: tuple[int, ...], walk_index: int) -> Walk:
    """Walk from the stream (*key, walk_index, retry), retrying stalled walks with the next retry."""
    for retry in range(MAX_WALK_RETRIES):
        try:
            return generate_walk(H, (*key, walk_index, retry))
        except WalkStalled as exc:
            logger.warning("Walk %d stalled (%s), retrying with a fresh seed", walk_index, exc)
            failure = exc
    raise failure


def hmm_multiwalk(
    llr_channel: npt.ArrayLike,
    max_walks: int,
    iters: int,
    mode: EmissionMode,
    H: ParityCheckMatrix,
    seed: SeedKey,
    *,
    disable_repeats: bool = False,
    repeat_rule: RepeatRule = "occurrence",
    dedup: bool = False,
) -> MultiwalkResult:
    """Try up to max_walks fresh walks, each restarting from the channel LLRs.

    Walk w draws its walk from the stream (*seed, w). Rows of the returned
    matrix are the first-iteration LLRs of every walk that was run.
    """
    ensure_positive(max_walks, "max_walks")
    key = as_key(seed)
    channel = saturate(ensure_real_vector(llr_channel, H.n_vars, "llr_channel"))
    rows: list[npt.NDArray[np.float64]] = []
    best: HmmResult | None = None

    for walk_index in range(max_walks):
        walk = draw_walk(H, key, walk_index)
        result = hmm_iterate(
            channel,
            walk,
            iters,
            mode,
            disable_repeats,
            H,
            repeat_rule=repeat_rule,
            dedup=dedup,
        )
        rows.append(result.first_iteration_llrs)
        if best is None or result.unsatisfied_checks < best.unsatisfied_checks:
            best = result
        if result.decoded:
            logger.debug(
                "HMM (%s) decoded on walk %d after %d iterations",
                mode,
                walk_index + 1,
                result.iterations_used,
            )
            return MultiwalkResult(result, np.vstack(rows), result.llr_out, 0, walk_index + 1)

    assert best is not None
    return MultiwalkResult(best, np.vstack(rows), best.llr_out, best.unsatisfied_checks, max_walks)
