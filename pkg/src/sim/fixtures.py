"""Stress frames that only a particular strategy decodes, pinned for regression tests.

A "chaining" frame fails plain BP and fails every HMM walk on its own, yet
decodes once the best walk output is handed to BP. An "erasure" frame fails
stage 1 entirely and decodes only after reliability-sorted erasures.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
import json
import logging
from pathlib import Path
from typing import Any, Literal

import numpy as np
import numpy.typing as npt

from src.core.config import DecoderConfig, SimConfig
from src.core.errors import CodeFormatError
from src.core.ldpc_code import LdpcCode
from src.decoders.staged_decoder import DecodeOutcome, StagedDecoder
from src.decoders.tanner_bp import bp_decode
from src.sim.harness import Stream, channel_for, resolve_code, transmit_frame


logger = logging.getLogger(__name__)

FixtureKind = Literal["chaining", "erasure"]
FIXTURE_KINDS: tuple[FixtureKind, ...] = ("chaining", "erasure")


@dataclass(frozen=True)
class StressFixture:
    kind: FixtureKind
    llr: tuple[float, ...]
    codeword: tuple[int, ...]
    code_ref: dict[str, int]
    expected_stage: int
    decoder_seed: tuple[int, ...]
    decoder_config: dict[str, Any]
    ebn0_db: float

    def to_json(self) -> dict[str, Any]:
        document = asdict(self)
        document["llr"] = list(self.llr)
        document["codeword"] = list(self.codeword)
        document["decoder_seed"] = list(self.decoder_seed)
        return document

    @classmethod
    def from_json(cls, document: dict[str, Any]) -> "StressFixture":
        try:
            kind = document["kind"]
            if kind not in FIXTURE_KINDS:
                raise ValueError(f"unknown fixture kind {kind!r}")
            return cls(
                kind=kind,
                llr=tuple(float(v) for v in document["llr"]),
                codeword=tuple(int(v) for v in document["codeword"]),
                code_ref={key: int(value) for key, value in document["code_ref"].items()},
                expected_stage=int(document["expected_stage"]),
                decoder_seed=tuple(int(v) for v in document["decoder_seed"]),
                decoder_config=dict(document["decoder_config"]),
                ebn0_db=float(document["ebn0_db"]),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise CodeFormatError(f"malformed fixture: {exc}") from exc

    @property
    def config(self) -> DecoderConfig:
        return DecoderConfig(**self.decoder_config)


def save_fixture(fixture: StressFixture, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(fixture.to_json(), indent=2) + "\n", encoding="utf-8")


def load_fixture(path: Path) -> StressFixture:
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CodeFormatError(f"cannot read fixture {path}: {exc}") from exc
    return StressFixture.from_json(document)


def replay_fixture(fixture: StressFixture, code: LdpcCode) -> DecodeOutcome:
    """Decode the pinned frame with its stored configuration and walk seed."""
    decoder = StagedDecoder.for_code(code, fixture.config)
    return decoder.decode(np.asarray(fixture.llr), fixture.decoder_seed)


def _strategy_config(base: DecoderConfig, kind: FixtureKind) -> DecoderConfig:
    stages = (1,) if kind == "chaining" else (1, 3)
    return base.model_copy(update={"stage_mask": stages, "repair2": False})


def classify_frame(
    llr: npt.NDArray[np.float64],
    code: LdpcCode,
    config: DecoderConfig,
    seed: tuple[int, ...],
    kinds: tuple[FixtureKind, ...] = FIXTURE_KINDS,
) -> tuple[FixtureKind, DecodeOutcome] | None:
    """Which strategy, if any, is the only one that rescues this frame, with its outcome.

    Only the strategies named in `kinds` are tried.
    """
    if bp_decode(llr, code.H, config.bp_iters).converged:
        return None
    chained = StagedDecoder.for_code(code, _strategy_config(config, "chaining")).decode(llr, seed)
    if chained.success:
        return ("chaining", chained) if chained.finisher == "bp" and "chaining" in kinds else None
    if "erasure" not in kinds:
        return None
    erased = StagedDecoder.for_code(code, _strategy_config(config, "erasure")).decode(llr, seed)
    if erased.success and erased.stage == 3:
        return "erasure", erased
    return None


def search_fixtures(
    cfg: SimConfig,
    kinds: tuple[FixtureKind, ...] = FIXTURE_KINDS,
    max_frames: int = 1000,
) -> list[StressFixture]:
    """Scan simulated frames at the first Eb/N0 until one fixture per kind is found."""
    if cfg.code_file is not None:
        raise CodeFormatError("fixtures are pinned to constructed codes; drop --code-file")
    code = resolve_code(cfg)
    params = channel_for(code, cfg.ebn0_db[0], cfg.noiseless)
    found: dict[FixtureKind, StressFixture] = {}

    for frame_index in range(max_frames):
        key = (cfg.master_seed, 0, frame_index)
        frame = transmit_frame(code, params, key)
        seed = (*key, int(Stream.DECODER))
        pending = tuple(kind for kind in kinds if kind not in found)
        verdict = classify_frame(frame.llr_channel, code, cfg.decoder_config, seed, pending)
        if verdict is None:
            continue
        kind, outcome = verdict
        strategy = _strategy_config(cfg.decoder_config, kind)
        if int(np.count_nonzero(outcome.hard != frame.codeword)) > 2:
            logger.info("Frame %d decoded to a wrong codeword; skipping", frame_index)
            continue
        logger.info("Frame %d is a %s fixture (stage %s)", frame_index, kind, outcome.stage)
        found[kind] = StressFixture(
            kind=kind,
            llr=tuple(float(v) for v in frame.llr_channel),
            codeword=tuple(int(v) for v in frame.codeword),
            code_ref={"frame_bits": cfg.frame_bits, "code_seed": cfg.code_seed},
            expected_stage=int(outcome.stage),
            decoder_seed=seed,
            decoder_config=strategy.model_dump(mode="json"),
            ebn0_db=cfg.ebn0_db[0],
        )
        if len(found) == len(kinds):
            break

    missing = [kind for kind in kinds if kind not in found]
    if missing:
        logger.warning("No %s fixture found in %d frames", ", ".join(missing), max_frames)
    return [found[kind] for kind in kinds if kind in found]
