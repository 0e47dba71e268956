"""Staged decoding: HMM walks, HMM-to-BP chaining and reliability-sorted erasures.

Stages run in order and the first success ends the frame:

1. simple-emission multiwalk, best walk output chained into BP
2. the same with extended emissions
3. erasure sweep driven by the stage-1 first-iteration statistics
4. erasure sweep with extended emissions
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Any, Literal

import numpy as np
import numpy.typing as npt

from src.core.channel import hard_decision, saturate
from src.core.config import DecoderConfig
from src.core.ldpc_code import (
    GeneratorMatrix,
    LdpcCode,
    ParityCheckMatrix,
    flip_bits,
    info_bits,
    syndrome,
)
from src.core.seeding import SeedKey, as_key
from src.decoders.hmm_decoder import EmissionMode, draw_walk, hmm_iterate, hmm_multiwalk
from src.decoders.tanner_bp import bp_decode
from src.utils.validators import ensure_real_vector


logger = logging.getLogger(__name__)

RELIABILITY_EPS = 1e-12
RELIABILITY_CAP = 1e12

StageLabel = Literal[1, 2, 3, 4, "failed"]
Finisher = Literal["hmm", "bp", "repair", "none"]

_STAGE_MODES: dict[int, EmissionMode] = {1: "simple", 2: "extended", 3: "simple", 4: "extended"}
_STATS_STREAM = 0xFFFF


@dataclass(frozen=True, eq=False)
class ReliabilityStats:
    gamma: npt.NDArray[np.float64]
    samples: npt.NDArray[np.float64]


def _gamma(std: npt.ArrayLike, mean: npt.ArrayLike) -> npt.NDArray[np.float64]:
    ratio = np.asarray(std) / np.maximum(np.abs(np.asarray(mean)), RELIABILITY_EPS)
    return np.asarray(np.minimum(ratio, RELIABILITY_CAP), dtype=np.float64)


def reliability_metric(x: npt.ArrayLike) -> float:
    """Sample std over |mean| of one bit's first-iteration LLRs, capped."""
    values = np.asarray(x, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise ValueError("reliability_metric needs at least two samples")
    return float(_gamma(values.std(ddof=1), values.mean()))


def reliability_stats(first_iteration_matrix: npt.ArrayLike) -> ReliabilityStats:
    """Column-wise reliability metric of a (walks, N) matrix."""
    samples = np.asarray(first_iteration_matrix, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ValueError("reliability statistics need first-iteration LLRs from at least two walks")
    gamma = _gamma(samples.std(axis=0, ddof=1), samples.mean(axis=0))
    return ReliabilityStats(gamma=gamma, samples=samples)


def erasure_count(fraction: float, n_vars: int) -> int:
    return int(math.ceil(fraction * n_vars - 1e-9))


def sort_and_erase(
    llr: npt.ArrayLike, stats: ReliabilityStats, fraction: float
) -> npt.NDArray[np.float64]:
    """Zero the LLRs of the ceil(fraction * N) bits with the largest gamma.

    Bits are ranked by ascending gamma with ties in ascending index order, so
    among equal gammas the highest indices are erased first.
    """
    values = np.array(llr, dtype=np.float64, copy=True)
    if stats.gamma.shape != values.shape:
        raise ValueError("reliability statistics do not match the LLR vector")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"erasure fraction must lie in (0, 1], got {fraction}")
    count = erasure_count(fraction, values.size)
    order = np.lexsort((np.arange(values.size), stats.gamma))
    values[order[values.size - count :]] = 0.0
    return values


def erasure_schedule(step: float, maximum: float) -> list[float]:
    """Fractions step, 2*step, ... up to and including maximum."""
    if step <= 0.0 or maximum < step:
        raise ValueError("erasure schedule needs 0 < step <= maximum")
    count = int(math.floor(maximum / step + 1e-9))
    return [round(step * k, 12) for k in range(1, count + 1)]


def two_bit_repair(
    hard: npt.ArrayLike, H: ParityCheckMatrix
) -> npt.NDArray[np.uint8] | None:
    """Smallest flip set of weight <= 2 that zeroes the syndrome.

    Single flips are tried before pairs; pairs go in lexicographic (i, j) order.
    """
    word = np.asarray(hard, dtype=np.uint8)
    target = syndrome(word, H)
    if not target.any():
        return word.copy()
    columns = np.packbits(H.dense, axis=0).T
    packed_target = np.packbits(target)

    singles = np.flatnonzero((columns == packed_target).all(axis=1))
    if singles.size:
        return flip_bits(word, [int(singles[0])])

    for first in range(H.n_vars - 1):
        wanted = columns[first] ^ packed_target
        hits = np.flatnonzero((columns[first + 1 :] == wanted).all(axis=1))
        if hits.size:
            return flip_bits(word, [first, first + 1 + int(hits[0])])
    return None


@dataclass(frozen=True, eq=False)
class DecodeOutcome:
    hard: npt.NDArray[np.uint8]
    info_bits: npt.NDArray[np.uint8]
    success: bool
    stage: StageLabel
    walks_used: int = 0
    bp_invocations: int = 0
    erasure_fraction: float = 0.0
    llr_out: npt.NDArray[np.float64] | None = field(default=None, repr=False)
    finisher: Finisher = "none"

    def __post_init__(self) -> None:
        if (self.stage == "failed") == self.success:
            raise ValueError("stage must be 'failed' exactly when success is false")

    def to_dict(self) -> dict[str, Any]:
        return {
            "success": self.success,
            "stage": self.stage,
            "finisher": self.finisher,
            "walks_used": self.walks_used,
            "bp_invocations": self.bp_invocations,
            "erasure_fraction": self.erasure_fraction,
            "hard": self.hard.tolist(),
            "info_bits": self.info_bits.tolist(),
        }


@dataclass
class _Progress:
    """Counters and the best-so-far hard decision of one frame."""

    walks_used: int = 0
    bp_invocations: int = 0
    best_hard: npt.NDArray[np.uint8] | None = None
    best_llr: npt.NDArray[np.float64] | None = None
    best_unsatisfied: int = -1

    def remember(self, llr: npt.NDArray[np.float64], H: ParityCheckMatrix) -> None:
        hard = hard_decision(llr)
        unsatisfied = int(syndrome(hard, H).sum())
        if self.best_hard is None or unsatisfied < self.best_unsatisfied:
            self.best_hard, self.best_llr, self.best_unsatisfied = hard, llr, unsatisfied


@dataclass
class StagedDecoder:
    """Runs the enabled stages of the pipeline on one frame at a time."""

    H: ParityCheckMatrix
    G: GeneratorMatrix
    config: DecoderConfig = field(default_factory=DecoderConfig)

    @classmethod
    def for_code(cls, code: LdpcCode, config: DecoderConfig | None = None) -> "StagedDecoder":
        return cls(H=code.H, G=code.G, config=config or DecoderConfig())

    def decode(self, llr_channel: npt.ArrayLike, seed: SeedKey = 0) -> DecodeOutcome:
        """Decode one frame; walk streams derive from `seed`, so equal seeds give equal outcomes."""
        key = as_key(seed)
        channel = saturate(ensure_real_vector(llr_channel, self.H.n_vars, "llr_channel"))
        progress = _Progress()
        progress.remember(channel, self.H)
        first_iteration: dict[EmissionMode, npt.NDArray[np.float64]] = {}

        for stage in (1, 2):
            if stage not in self.config.stage_mask:
                continue
            mode = _STAGE_MODES[stage]
            logger.debug("Stage %d: %s-emission multiwalk", stage, mode)
            outcome, matrix = self._attempt(channel, mode, (*key, stage), progress, stage, 0.0)
            first_iteration[mode] = matrix
            if outcome is not None:
                return outcome

        schedule = erasure_schedule(self.config.erase_step, self.config.erase_max)
        for stage in (3, 4):
            if stage not in self.config.stage_mask:
                continue
            mode = _STAGE_MODES[stage]
            matrix = self._statistics_matrix(
                channel, mode, first_iteration.get(mode), (*key, stage, _STATS_STREAM), progress
            )
            stats = reliability_stats(matrix)
            for index, fraction in enumerate(schedule):
                logger.debug("Stage %d: erasing %.0f%% of the bits", stage, fraction * 100)
                erased = sort_and_erase(channel, stats, fraction)
                outcome, _ = self._attempt(erased, mode, (*key, stage, index), progress, stage, fraction)
                if outcome is not None:
                    return outcome

        logger.debug("Frame failed after %d walks", progress.walks_used)
        assert progress.best_hard is not None
        return DecodeOutcome(
            hard=progress.best_hard,
            info_bits=info_bits(progress.best_hard, self.G),
            success=False,
            stage="failed",
            walks_used=progress.walks_used,
            bp_invocations=progress.bp_invocations,
            erasure_fraction=0.0,
            llr_out=progress.best_llr,
        )

    def _attempt(
        self,
        llr: npt.NDArray[np.float64],
        mode: EmissionMode,
        key: tuple[int, ...],
        progress: _Progress,
        stage: int,
        fraction: float,
    ) -> tuple[DecodeOutcome | None, npt.NDArray[np.float64]]:
        cfg = self.config
        walks = hmm_multiwalk(
            llr,
            cfg.max_walks,
            cfg.iters,
            mode,
            self.H,
            key,
            disable_repeats=cfg.disable_repeats,
            repeat_rule=cfg.repeat_rule,
            dedup=cfg.extended_dedup,
        )
        progress.walks_used += walks.walks_used
        progress.remember(walks.best_output, self.H)
        matrix = walks.first_iteration_matrix

        def finish(
            hard: npt.NDArray[np.uint8], out: npt.NDArray[np.float64], finisher: Finisher
        ) -> DecodeOutcome:
            logger.debug("Stage %d decoded by %s after %d walks", stage, finisher, progress.walks_used)
            return DecodeOutcome(
                hard=hard,
                info_bits=info_bits(hard, self.G),
                success=True,
                stage=stage,  # type: ignore[arg-type]
                walks_used=progress.walks_used,
                bp_invocations=progress.bp_invocations,
                erasure_fraction=fraction,
                llr_out=out,
                finisher=finisher,
            )

        if walks.result.decoded:
            return finish(hard_decision(walks.result.llr_out), walks.result.llr_out, "hmm"), matrix

        bp = bp_decode(walks.best_output, self.H, cfg.bp_iters)
        progress.bp_invocations += 1
        progress.remember(bp.llr_out, self.H)
        if bp.converged:
            return finish(bp.hard, bp.llr_out, "bp"), matrix

        if cfg.repair2:
            candidates = ((bp.hard, bp.llr_out), (hard_decision(walks.best_output), walks.best_output))
            for candidate, out in candidates:
                repaired = two_bit_repair(candidate, self.H)
                if repaired is not None:
                    return finish(repaired, out, "repair"), matrix
        return None, matrix

    def _statistics_matrix(
        self,
        channel: npt.NDArray[np.float64],
        mode: EmissionMode,
        captured: npt.NDArray[np.float64] | None,
        key: tuple[int, ...],
        progress: _Progress,
    ) -> npt.NDArray[np.float64]:
        """First-iteration LLRs from the earlier stage, topped up to at least two walks."""
        rows = [] if captured is None else list(captured)
        wanted = max(2, self.config.max_walks) if captured is None else 2
        extra = 0
        while len(rows) < wanted:
            walk = draw_walk(self.H, key, extra)
            first = hmm_iterate(
                channel,
                walk,
                1,
                mode,
                self.config.disable_repeats,
                self.H,
                repeat_rule=self.config.repeat_rule,
                dedup=self.config.extended_dedup,
            )
            rows.append(first.first_iteration_llrs)
            extra += 1
        if extra:
            logger.debug("Generated %d extra %s walks for reliability statistics", extra, mode)
            progress.walks_used += extra
        return np.vstack(rows)


def decode(
    llr_channel: npt.ArrayLike,
    H: ParityCheckMatrix,
    G: GeneratorMatrix,
    config: DecoderConfig | None = None,
    seed: SeedKey = 0,
) -> DecodeOutcome:
    return StagedDecoder(H=H, G=G, config=config or DecoderConfig()).decode(llr_channel, seed)
