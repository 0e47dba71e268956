from __future__ import annotations

from abc import ABC, abstractmethod
import logging

import numpy.typing as npt

from src.core.config import DecoderConfig, DecoderKind
from src.core.ldpc_code import LdpcCode, info_bits
from src.core.seeding import SeedKey
from src.decoders.staged_decoder import DecodeOutcome, StagedDecoder, two_bit_repair
from src.decoders.tanner_bp import bp_decode


logger = logging.getLogger(__name__)


class FrameDecoder(ABC):
    """Turns one frame of channel LLRs into a DecodeOutcome."""

    name: str = "decoder"

    @abstractmethod
    def decode(self, llr_channel: npt.ArrayLike, seed: SeedKey) -> DecodeOutcome:
        raise NotImplementedError


class BpFrameDecoder(FrameDecoder):
    """Plain Tanner-graph BP; successes are reported as stage 1."""

    name = "bp"

    def __init__(self, code: LdpcCode, config: DecoderConfig) -> None:
        self.code = code
        self.config = config

    def decode(self, llr_channel: npt.ArrayLike, seed: SeedKey) -> DecodeOutcome:
        result = bp_decode(llr_channel, self.code.H, self.config.bp_iters)
        hard, finisher = result.hard, "bp"
        success = result.converged
        if not success and self.config.repair2:
            repaired = two_bit_repair(result.hard, self.code.H)
            if repaired is not None:
                hard, finisher, success = repaired, "repair", True
        return DecodeOutcome(
            hard=hard,
            info_bits=info_bits(hard, self.code.G),
            success=success,
            stage=1 if success else "failed",
            bp_invocations=1,
            llr_out=result.llr_out,
            finisher=finisher if success else "none",  # type: ignore[arg-type]
        )


class HmmFrameDecoder(FrameDecoder):
    name = "hmm"

    def __init__(self, code: LdpcCode, config: DecoderConfig) -> None:
        self.staged = StagedDecoder.for_code(code, config)

    def decode(self, llr_channel: npt.ArrayLike, seed: SeedKey) -> DecodeOutcome:
        return self.staged.decode(llr_channel, seed)


def create_decoder(kind: DecoderKind, code: LdpcCode, config: DecoderConfig | None = None) -> FrameDecoder:
    """Factory for the decoders the harness can select."""
    config = config or DecoderConfig()
    if kind == "bp":
        return BpFrameDecoder(code, config)
    if kind == "hmm":
        return HmmFrameDecoder(code, config)
    raise ValueError(f"Unsupported decoder: {kind}")
