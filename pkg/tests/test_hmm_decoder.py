import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from src.core.channel import LLR_MAX, hard_decision
from src.core.errors import DegreeMismatch, UncoveredVariable, WalkStalled
from src.core.ldpc_code import LdpcCode, ParityCheckMatrix, encode, syndrome
from src.decoders import hmm_decoder
from src.decoders.hmm_decoder import (
    STATE_BITS,
    TRANSITION_MATRIX,
    FbState,
    HmmResult,
    emission_columns,
    emission_extended,
    emission_simple,
    forward_backward,
    hmm_iterate,
    hmm_multiwalk,
    parity_constrained_sum,
    posterior_to_llr,
    sample_chain,
    transition_matrix,
)
from src.decoders.hmm_walk import Walk, WalkStep, generate_walk


def _enumerated_sum(probs: list[float], parity: int) -> float:
    total = 0.0
    for bits in itertools.product((0, 1), repeat=len(probs)):
        if sum(bits) % 2 == parity:
            total += float(np.prod([p if b else 1.0 - p for p, b in zip(probs, bits)]))
    return total


def _bit_prob(llr: np.ndarray, var: int, value: int) -> float:
    p_one = float(expit(llr[var]))
    return p_one if value else 1.0 - p_one


def _check_sum(llr: np.ndarray, H: ParityCheckMatrix, check: int, skip: set[int], parity: int) -> float:
    latent = [float(expit(llr[v])) for v in H.check_supports[check] if v not in skip]
    return _enumerated_sum(latent, parity)


def _path_posteriors(emissions: np.ndarray) -> np.ndarray:
    steps = emissions.shape[0]
    paths = np.array(list(itertools.product(range(4), repeat=steps)))
    weights = np.full(len(paths), 0.25)
    for k in range(steps):
        weights = weights * emissions[k, paths[:, k]]
        if k:
            weights = weights * TRANSITION_MATRIX[paths[:, k - 1], paths[:, k]]
    posteriors = np.zeros((steps, 4))
    for k in range(steps):
        np.add.at(posteriors[k], paths[:, k], weights)
    return posteriors / posteriors.sum(axis=1, keepdims=True)


def test_transition_matrix_matches_the_shared_bit_rule() -> None:
    T = transition_matrix()

    assert T.tolist() == [
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.5, 0.5],
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.5, 0.5],
    ]
    assert np.allclose(T.sum(axis=1), 1.0)
    for s, (_, b) in enumerate(STATE_BITS):
        for t, (a_next, _) in enumerate(STATE_BITS):
            assert (T[s, t] > 0) == (a_next == b)


def test_transition_matrix_constant_is_read_only() -> None:
    with pytest.raises(ValueError):
        TRANSITION_MATRIX[0, 0] = 1.0


def test_sampled_chains_never_take_forbidden_transitions() -> None:
    states = sample_chain(TRANSITION_MATRIX, 200_000, seed=5)

    assert (TRANSITION_MATRIX[states[:-1], states[1:]] > 0).all()
    assert set(np.unique(states).tolist()) == {0, 1, 2, 3}


@pytest.mark.slow
def test_million_step_chain_respects_the_shared_bit() -> None:
    states = sample_chain(TRANSITION_MATRIX, 1_000_000, seed=6)

    assert (TRANSITION_MATRIX[states[:-1], states[1:]] > 0).all()


def test_parity_constrained_sum_examples() -> None:
    assert parity_constrained_sum([0.5] * 4, 0) == pytest.approx(0.5)
    assert parity_constrained_sum([0.0] * 4, 0) == 1.0
    assert parity_constrained_sum([0.0] * 4, 1) == 0.0
    probs = [0.9, 0.2, 0.3, 0.6]
    assert parity_constrained_sum(probs, 0) == pytest.approx(_enumerated_sum(probs, 0), abs=1e-12)


def test_parity_constrained_sum_matches_enumeration_on_random_inputs(rng: np.random.Generator) -> None:
    for _ in range(10_000):
        probs = rng.random(4).tolist()
        parity = int(rng.integers(2))
        assert parity_constrained_sum(probs, parity) == pytest.approx(
            _enumerated_sum(probs, parity), abs=1e-12
        )


@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=0, max_size=6))
@settings(max_examples=200, deadline=None)
def test_parity_sums_split_the_unit_mass(probs: list[float]) -> None:
    even = parity_constrained_sum(probs, 0)
    odd = parity_constrained_sum(probs, 1)

    assert even >= -1e-12 and odd >= -1e-12
    assert even + odd == pytest.approx(1.0, abs=1e-12)


def test_parity_constrained_sum_rejects_invalid_probabilities() -> None:
    with pytest.raises(ValueError):
        parity_constrained_sum([0.2, 1.5], 0)


def test_simple_emission_with_zero_llrs_is_uniform(star_matrix: ParityCheckMatrix) -> None:
    step = WalkStep.build(star_matrix, 0, 0, 1)

    column = emission_simple(step, np.zeros(26), star_matrix)

    assert column == pytest.approx([0.25] * 4, abs=1e-12)


def test_simple_emission_concentrates_on_consistent_zero_pair(star_matrix: ParityCheckMatrix) -> None:
    step = WalkStep.build(star_matrix, 0, 0, 1)
    llr = np.full(26, -LLR_MAX)

    column = emission_simple(step, llr, star_matrix)

    assert column[0] > 0.999
    assert column.sum() == pytest.approx(1.0, abs=1e-12)


def _simple_oracle_batch(llrs: np.ndarray, H: ParityCheckMatrix, first: int, second: int) -> np.ndarray:
    """Enumerated simple emissions for every row of `llrs` at once."""
    p = expit(llrs)
    latent = [v for v in H.check_supports[0] if v not in (first, second)]
    combos = np.array(list(itertools.product((0, 1), repeat=len(latent))), dtype=bool)
    weights = np.where(combos[None, :, :], p[:, None, latent], 1.0 - p[:, None, latent]).prod(axis=2)
    odd = combos.sum(axis=1) % 2 == 1
    sums = np.stack([weights[:, ~odd].sum(axis=1), weights[:, odd].sum(axis=1)], axis=1)
    expected = np.stack(
        [
            np.where(a, p[:, first], 1.0 - p[:, first])
            * np.where(b, p[:, second], 1.0 - p[:, second])
            * sums[:, a ^ b]
            for a, b in STATE_BITS
        ],
        axis=1,
    )
    return expected / expected.sum(axis=1, keepdims=True)


def test_simple_emission_matches_enumeration(
    star_matrix: ParityCheckMatrix, rng: np.random.Generator
) -> None:
    step = WalkStep.build(star_matrix, 0, 2, 5)
    llrs = rng.normal(0.0, 3.0, size=(10_000, 26))
    expected = _simple_oracle_batch(llrs, star_matrix, 2, 5)

    for llr, oracle in zip(llrs, expected):
        assert emission_simple(step, llr, star_matrix) == pytest.approx(oracle, abs=1e-12)


def _extended_oracle(llr: np.ndarray, H: ParityCheckMatrix, dedup: bool) -> np.ndarray:
    values = []
    for a, b in STATE_BITS:
        pa, pb = _bit_prob(llr, 0, a), _bit_prob(llr, 1, b)
        value = pa * pb * _check_sum(llr, H, 0, {0, 1}, a ^ b)
        for check in (1, 2):
            value *= (1.0 if dedup else pa) * _check_sum(llr, H, check, {0}, a)
        for check in (3, 4):
            value *= (1.0 if dedup else pb) * _check_sum(llr, H, check, {1}, b)
        values.append(value)
    column = np.array(values)
    return column / column.sum()


@pytest.mark.parametrize("dedup", [False, True])
def test_extended_emission_matches_multi_check_enumeration(
    star_matrix: ParityCheckMatrix, rng: np.random.Generator, dedup: bool
) -> None:
    step = WalkStep.build(star_matrix, 0, 0, 1)
    for _ in range(50):
        llr = rng.normal(0.0, 2.0, size=26)

        column = emission_extended(step, llr, star_matrix, dedup=dedup)

        assert column == pytest.approx(_extended_oracle(llr, star_matrix, dedup), abs=1e-10)


def test_extended_emission_with_uninformative_neighbours_cubes_the_state_bits(
    star_matrix: ParityCheckMatrix, rng: np.random.Generator
) -> None:
    step = WalkStep.build(star_matrix, 0, 0, 1)
    llr = np.zeros(26)
    llr[:6] = rng.normal(0.0, 2.0, size=6)

    column = emission_extended(step, llr, star_matrix)

    expected = np.array(
        [
            _bit_prob(llr, 0, a) ** 3
            * _bit_prob(llr, 1, b) ** 3
            * _check_sum(llr, star_matrix, 0, {0, 1}, a ^ b)
            for a, b in STATE_BITS
        ]
    )
    assert column == pytest.approx(expected / expected.sum(), abs=1e-12)


def test_extended_emission_with_zero_llrs_is_uniform(star_matrix: ParityCheckMatrix) -> None:
    step = WalkStep.build(star_matrix, 0, 0, 1)

    assert emission_extended(step, np.zeros(26), star_matrix) == pytest.approx([0.25] * 4)


def test_extended_emission_needs_two_adjacent_checks(star_matrix: ParityCheckMatrix) -> None:
    step = WalkStep.build(star_matrix, 0, 2, 3)

    with pytest.raises(DegreeMismatch):
        emission_extended(step, np.zeros(26), star_matrix)


def test_repeated_state_bits_are_set_to_uncertainty(star_matrix: ParityCheckMatrix) -> None:
    walk = Walk.from_steps([WalkStep.build(star_matrix, 0, 2, 3)], 26)
    llr = np.zeros(26)
    llr[[2, 3, 4]] = [8.0, -1.0, 2.5]
    repeats = np.array([[True, False]])

    masked = emission_columns(walk, llr, star_matrix, "simple", repeats)
    reference = emission_columns(walk, np.where(np.arange(26) == 2, 0.0, llr), star_matrix, "simple")

    assert masked == pytest.approx(reference, abs=1e-12)


def test_forward_backward_single_step_returns_the_emission() -> None:
    fb = forward_backward([[0.4, 0.3, 0.2, 0.1]])

    assert fb.posteriors[0] == pytest.approx([0.4, 0.3, 0.2, 0.1], abs=1e-12)


def test_forward_backward_uniform_emissions_give_uniform_posteriors() -> None:
    fb = forward_backward(np.full((2, 4), 0.25))

    assert fb.posteriors == pytest.approx(np.full((2, 4), 0.25), abs=1e-12)


def test_forward_backward_matches_path_enumeration(rng: np.random.Generator) -> None:
    for _ in range(100):
        steps = int(rng.integers(1, 7))
        emissions = rng.random((steps, 4)) + 1e-3
        emissions /= emissions.sum(axis=1, keepdims=True)

        fb = forward_backward(emissions)

        assert fb.posteriors == pytest.approx(_path_posteriors(emissions), abs=1e-10)
        assert fb.forward.sum(axis=1) == pytest.approx(np.ones(steps), abs=1e-12)
        assert fb.backward.sum(axis=1) == pytest.approx(np.ones(steps), abs=1e-12)


def test_unnormalized_forward_backward_agrees_on_short_chains(rng: np.random.Generator) -> None:
    emissions = rng.random((5, 4)) + 0.1

    normalized = forward_backward(emissions)
    raw = forward_backward(emissions, normalize=False)

    assert raw.posteriors == pytest.approx(normalized.posteriors, abs=1e-12)


def test_forward_backward_requires_a_step() -> None:
    with pytest.raises(ValueError):
        forward_backward(np.zeros((0, 4)))


def _two_step_walk() -> Walk:
    steps = [WalkStep(0, 0, 1, (), ()), WalkStep(1, 1, 2, (), ())]
    return Walk.from_steps(steps, 3)


def _fb(posteriors: list[list[float]]) -> FbState:
    post = np.array(posteriors)
    return FbState(forward=post, backward=np.ones_like(post), posteriors=post)


def test_posterior_to_llr_of_point_mass_is_saturated() -> None:
    llr = posterior_to_llr(_fb([[1, 0, 0, 0], [1, 0, 0, 0]]), _two_step_walk(), 3)

    assert llr.tolist() == [-LLR_MAX, -LLR_MAX, -LLR_MAX]


def test_posterior_to_llr_averages_occurrences() -> None:
    # Variable 1 is the second bit of step 0 (P1 = 0.7) and the first bit of step 1 (P1 = 0.3).
    fb = _fb([[0.2, 0.4, 0.1, 0.3], [0.5, 0.2, 0.1, 0.2]])

    llr = posterior_to_llr(fb, _two_step_walk(), 3)

    assert llr[1] == pytest.approx(0.0, abs=1e-12)
    assert llr[0] == pytest.approx(np.log(0.4 / 0.6))
    assert llr[2] == pytest.approx(np.log(0.4 / 0.6))


def test_posterior_to_llr_hand_computed_three_occurrences() -> None:
    steps = [WalkStep(0, 0, 1, (), ()), WalkStep(1, 1, 0, (), ()), WalkStep(0, 0, 1, (), ())]
    walk = Walk.from_steps(steps, 2)
    fb = _fb([[0.1, 0.2, 0.3, 0.4], [0.1, 0.1, 0.2, 0.6], [0.4, 0.3, 0.2, 0.1]])

    llr = posterior_to_llr(fb, walk, 2)

    # Variable 0: first bit at steps 0 and 2, second bit at step 1.
    expected = (np.log(0.7 / 0.3) + np.log(0.7 / 0.3) + np.log(0.3 / 0.7)) / 3
    assert llr[0] == pytest.approx(expected, abs=1e-12)


def test_posterior_to_llr_requires_coverage() -> None:
    with pytest.raises(UncoveredVariable):
        posterior_to_llr(_fb([[0.25] * 4, [0.25] * 4]), _two_step_walk(), 4)


def test_noiseless_frame_decodes_in_one_iteration(code128: LdpcCode, rng: np.random.Generator) -> None:
    c = encode(rng.integers(0, 2, size=64, dtype=np.uint8), code128.G)
    llr = np.where(c == 1, LLR_MAX, -LLR_MAX)
    walk = generate_walk(code128.H, seed=9)

    for mode in ("simple", "extended"):
        result = hmm_iterate(llr, walk, 5, mode, False, code128.H)  # type: ignore[arg-type]

        assert result.decoded
        assert result.iterations_used == 1
        assert np.array_equal(hard_decision(result.llr_out), c)


def test_hmm_iterate_records_a_trace(code128: LdpcCode, rng: np.random.Generator) -> None:
    llr = rng.choice([-LLR_MAX, LLR_MAX], size=128)
    walk = generate_walk(code128.H, seed=2)

    result = hmm_iterate(llr, walk, 3, "simple", True, code128.H, record_trace=True)

    assert not result.decoded
    assert result.iterations_used == 3
    assert len(result.trace) == 3
    assert np.array_equal(result.trace[0], result.first_iteration_llrs)
    assert result.unsatisfied_checks == int(syndrome(hard_decision(result.llr_out), code128.H).sum())


def test_hmm_iterate_is_deterministic(code128: LdpcCode, rng: np.random.Generator) -> None:
    llr = rng.normal(-2.0, 2.0, size=128)
    walk = generate_walk(code128.H, seed=3)

    first = hmm_iterate(llr, walk, 5, "simple", False, code128.H)
    second = hmm_iterate(llr, walk, 5, "simple", False, code128.H)

    assert np.array_equal(first.llr_out, second.llr_out)
    assert first.iterations_used == second.iterations_used


def test_multiwalk_success_on_first_walk(code128: LdpcCode) -> None:
    llr = np.full(128, -LLR_MAX)

    outcome = hmm_multiwalk(llr, 10, 5, "simple", code128.H, seed=(1, 2))

    assert outcome.result.decoded
    assert outcome.walks_used == 1
    assert outcome.first_iteration_matrix.shape == (1, 128)
    assert outcome.best_unsatisfied == 0


def test_multiwalk_without_success_keeps_every_walk(code128: LdpcCode, rng: np.random.Generator) -> None:
    llr = rng.choice([-LLR_MAX, LLR_MAX], size=128)

    outcome = hmm_multiwalk(llr, 3, 1, "simple", code128.H, seed=4)

    assert not outcome.result.decoded
    assert outcome.walks_used == 3
    assert outcome.first_iteration_matrix.shape == (3, 128)


def test_multiwalk_returns_the_output_with_fewest_unsatisfied_checks(
    code128: LdpcCode, monkeypatch: pytest.MonkeyPatch
) -> None:
    unsatisfied = iter([7, 3, 5])

    def fake_iterate(llr_channel: np.ndarray, walk: Walk, *args: object, **kwargs: object) -> HmmResult:
        count = next(unsatisfied)
        out = np.full(128, float(count))
        return HmmResult(out, False, 1, out, count)

    monkeypatch.setattr(hmm_decoder, "hmm_iterate", fake_iterate)

    outcome = hmm_multiwalk(np.zeros(128), 3, 1, "simple", code128.H, seed=0)

    assert outcome.best_unsatisfied == 3
    assert np.all(outcome.best_output == 3.0)
    assert outcome.first_iteration_matrix[:, 0].tolist() == [7.0, 3.0, 5.0]


def test_multiwalk_retries_stalled_walks(
    code128: LdpcCode, monkeypatch: pytest.MonkeyPatch, caplog: pytest.LogCaptureFixture
) -> None:
    real = hmm_decoder.generate_walk
    seeds: list[tuple[int, ...]] = []

    def flaky(H: ParityCheckMatrix, seed: tuple[int, ...]) -> Walk:
        seeds.append(seed)
        if len(seeds) == 1:
            raise WalkStalled("stuck")
        return real(H, seed)

    monkeypatch.setattr(hmm_decoder, "generate_walk", flaky)
    with caplog.at_level(logging.WARNING):
        outcome = hmm_multiwalk(np.full(128, -LLR_MAX), 2, 1, "simple", code128.H, seed=8)

    assert outcome.result.decoded
    assert seeds == [(8, 0, 0), (8, 0, 1)]
    assert "stalled" in caplog.text
