"""Frame error rate campaigns and single-frame forensics.

Each frame owns independent random streams keyed by
(master_seed, point_index, frame_index, purpose), so results do not depend on
the number of workers or on the batch size.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import IntEnum
import json
import logging
from pathlib import Path
import time
from typing import Any, Iterable, Sequence

import numpy as np
import numpy.typing as npt

from src.core.channel import (
    ChannelParams,
    awgn,
    channel_llr,
    hard_decision,
    inject_catastrophic,
    modulate,
)
from src.core.code_io import load_code
from src.core.config import DecoderKind, DecoderConfig, SimConfig
from src.core.errors import ConfigError
from src.core.ldpc_code import CodeParameters, LdpcCode, build_code, encode, syndrome
from src.core.seeding import make_rng
from src.decoders.base import FrameDecoder, create_decoder
from src.decoders.hmm_decoder import hmm_iterate
from src.decoders.hmm_walk import generate_walk, walk_to_json
from src.decoders.staged_decoder import DecodeOutcome, StageLabel
from src.sim.stats import confidence_interval


logger = logging.getLogger(__name__)

CSV_HEADER = (
    "ebn0_db,frames,errors,fer,ci_low,ci_high,stage1,stage2,stage3,stage4,failed,mean_walks,wall_s"
)
STAGE_KEYS = ("1", "2", "3", "4", "failed")
MAX_BIT_ERRORS = 2


class Stream(IntEnum):
    """Purpose tag appended to a frame's seed key."""

    DATA = 0
    NOISE = 1
    DECODER = 2
    TRACE = 3


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    bit_errors: int
    stage: StageLabel
    walks_used: int

    @property
    def frame_error(self) -> bool:
        return self.bit_errors > MAX_BIT_ERRORS


@dataclass
class FerPoint:
    """Aggregated counters for one Eb/N0 point."""

    ebn0_db: float
    frames: int = 0
    errors: int = 0
    stage_counts: dict[str, int] = field(default_factory=lambda: dict.fromkeys(STAGE_KEYS, 0))
    total_walks: int = 0
    wall_s: float = 0.0

    def add(self, record: FrameRecord) -> None:
        self.frames += 1
        self.errors += int(record.frame_error)
        self.stage_counts[str(record.stage)] += 1
        self.total_walks += record.walks_used

    @property
    def fer(self) -> float:
        return self.errors / self.frames if self.frames else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return confidence_interval(self.errors, self.frames) if self.frames else (0.0, 1.0)

    @property
    def mean_walks(self) -> float:
        return self.total_walks / self.frames if self.frames else 0.0

    def csv_row(self) -> str:
        low, high = self.ci
        counts = ",".join(str(self.stage_counts[key]) for key in STAGE_KEYS)
        return (
            f"{self.ebn0_db:g},{self.frames},{self.errors},{self.fer:.6e},{low:.6e},{high:.6e},"
            f"{counts},{self.mean_walks:.3f},{self.wall_s:.3f}"
        )

    def to_dict(self) -> dict[str, Any]:
        low, high = self.ci
        return {
            "ebn0_db": self.ebn0_db,
            "frames": self.frames,
            "errors": self.errors,
            "fer": self.fer,
            "ci_low": low,
            "ci_high": high,
            "stage_counts": dict(self.stage_counts),
            "mean_walks": self.mean_walks,
            "wall_s": self.wall_s,
        }


def resolve_code(cfg: SimConfig) -> LdpcCode:
    """Load the code file, or construct the code from frame_bits and code_seed."""
    if cfg.code_file is not None:
        return load_code(cfg.code_file)
    return build_code(CodeParameters.for_frame_bits(cfg.frame_bits), cfg.code_seed)


def channel_for(code: LdpcCode, ebn0_db: float, noiseless: bool) -> ChannelParams:
    if noiseless:
        return ChannelParams.noiseless(code.rate)
    return ChannelParams.from_ebn0(ebn0_db, code.rate)


@dataclass(frozen=True, eq=False)
class TransmittedFrame:
    codeword: npt.NDArray[np.uint8]
    llr_channel: npt.NDArray[np.float64]


def transmit_frame(
    code: LdpcCode, params: ChannelParams, key: tuple[int, ...]
) -> TransmittedFrame:
    """Random info bits, encoded, BPSK-modulated and passed through AWGN."""
    data = make_rng((*key, Stream.DATA)).integers(0, 2, size=code.n_info, dtype=np.uint8)
    codeword = encode(data, code.G)
    received = awgn(modulate(codeword), params, (*key, Stream.NOISE))
    return TransmittedFrame(codeword=codeword, llr_channel=channel_llr(received, params))


def simulate_frame(
    code: LdpcCode,
    decoder: FrameDecoder,
    params: ChannelParams,
    master_seed: int,
    point_index: int,
    frame_index: int,
) -> FrameRecord:
    key = (master_seed, point_index, frame_index)
    frame = transmit_frame(code, params, key)
    outcome = decoder.decode(frame.llr_channel, (*key, Stream.DECODER))
    return FrameRecord(
        frame_index=frame_index,
        bit_errors=int(np.count_nonzero(outcome.hard != frame.codeword)),
        stage=outcome.stage,
        walks_used=outcome.walks_used,
    )


_worker_state: dict[str, Any] = {}


def _init_worker(code: LdpcCode, kind: DecoderKind, config: DecoderConfig) -> None:
    _worker_state["code"] = code
    _worker_state["decoder"] = create_decoder(kind, code, config)


def _simulate_in_worker(task: tuple[ChannelParams, int, int, int]) -> FrameRecord:
    params, master_seed, point_index, frame_index = task
    return simulate_frame(
        _worker_state["code"], _worker_state["decoder"], params, master_seed, point_index, frame_index
    )


def _batches(total: int, size: int) -> Iterable[range]:
    for start in range(0, total, size):
        yield range(start, min(start + size, total))


def run_fer_sweep(cfg: SimConfig, code: LdpcCode | None = None) -> list[FerPoint]:
    """Simulate every Eb/N0 point of the campaign and write the configured outputs.

    With min_errors set, frames are scored in index order and a point stops at
    the frame whose error brings the count to min_errors.
    """
    try:
        code = code or resolve_code(cfg)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot prepare the code: {exc}") from exc
    logger.info(
        "FER sweep: N=%d, decoder=%s, %d point(s), %d frame(s) per point, %d worker(s)",
        code.n_vars,
        cfg.decoder,
        len(cfg.ebn0_db),
        cfg.frames,
        cfg.workers,
    )
    points: list[FerPoint] = []
    executor = (
        ProcessPoolExecutor(
            max_workers=cfg.workers,
            initializer=_init_worker,
            initargs=(code, cfg.decoder, cfg.decoder_config),
        )
        if cfg.workers > 1
        else None
    )
    decoder = create_decoder(cfg.decoder, code, cfg.decoder_config)
    try:
        for point_index, ebn0_db in enumerate(cfg.ebn0_db):
            params = channel_for(code, ebn0_db, cfg.noiseless)
            point = FerPoint(ebn0_db=ebn0_db)
            started = time.perf_counter()
            for batch in _batches(cfg.frames, cfg.batch_frames):
                if executor is None:
                    records = [
                        simulate_frame(code, decoder, params, cfg.master_seed, point_index, index)
                        for index in batch
                    ]
                else:
                    tasks = [(params, cfg.master_seed, point_index, index) for index in batch]
                    records = list(executor.map(_simulate_in_worker, tasks))
                if _absorb(point, records, cfg.min_errors):
                    break
                logger.info(
                    "Eb/N0 %.2f dB: %d frames, %d errors", ebn0_db, point.frames, point.errors
                )
            point.wall_s = time.perf_counter() - started if cfg.record_wall_time else 0.0
            logger.info(
                "Eb/N0 %.2f dB done: FER %.3e over %d frames (%d errors)",
                ebn0_db,
                point.fer,
                point.frames,
                point.errors,
            )
            points.append(point)
    finally:
        if executor is not None:
            executor.shutdown()

    if cfg.out_csv is not None:
        write_csv(points, cfg.out_csv)
    if cfg.out_json is not None:
        write_json(points, cfg, cfg.out_json)
    return points


def _absorb(point: FerPoint, records: list[FrameRecord], min_errors: int | None) -> bool:
    """Add records in frame order; True once min_errors has been reached."""
    for record in sorted(records, key=lambda r: r.frame_index):
        point.add(record)
        if min_errors is not None and point.errors >= min_errors:
            return True
    return False


def csv_text(points: Iterable[FerPoint]) -> str:
    return "\n".join([CSV_HEADER, *(point.csv_row() for point in points)]) + "\n"


def write_csv(points: Iterable[FerPoint], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(points), encoding="utf-8")
    logger.info("Wrote %s", path)


def write_json(points: Iterable[FerPoint], cfg: SimConfig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {
        "config": cfg.model_dump(mode="json"),
        "points": [point.to_dict() for point in points],
    }
    path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    logger.info("Wrote %s", path)


def stage_table(point: FerPoint) -> list[tuple[str, int]]:
    """Rows of the per-stage summary printed by the `stages` command."""
    rows = [(f"Decoded in Stage {key}", point.stage_counts[key]) for key in STAGE_KEYS[:4]]
    rows.append(("Failed", point.stage_counts["failed"]))
    rows.append(("Total Simulated Frames", point.frames))
    return rows


@dataclass(frozen=True, eq=False)
class SingleFrame:
    outcome: DecodeOutcome
    codeword: npt.NDArray[np.uint8]
    llr_channel: npt.NDArray[np.float64]
    bit_errors: int
    trace_files: tuple[Path, ...] = ()


def run_single_frame(
    cfg: SimConfig,
    frame_seed: int,
    trace_dir: Path | None = None,
    code: LdpcCode | None = None,
    catastrophic: Sequence[int] = (),
) -> SingleFrame:
    """Decode one frame at the first Eb/N0 of the campaign, optionally dumping traces.

    The trace pair runs the same walk and channel evidence with repeated states
    kept and with them set to uncertainty. Positions in `catastrophic` get a
    confidently wrong channel LLR before decoding.
    """
    code = code or resolve_code(cfg)
    if any(not 0 <= position < code.n_vars for position in catastrophic):
        raise ConfigError(f"catastrophic positions must lie in [0, {code.n_vars})")
    params = channel_for(code, cfg.ebn0_db[0], cfg.noiseless)
    key = (cfg.master_seed, 0, frame_seed)
    frame = transmit_frame(code, params, key)
    if catastrophic:
        frame = replace(
            frame, llr_channel=inject_catastrophic(frame.llr_channel, frame.codeword, catastrophic)
        )
    decoder = create_decoder(cfg.decoder, code, cfg.decoder_config)
    outcome = decoder.decode(frame.llr_channel, (*key, Stream.DECODER))
    bit_errors = int(np.count_nonzero(outcome.hard != frame.codeword))
    logger.info(
        "Frame %d: stage %s, %d walks, %d bit errors",
        frame_seed,
        outcome.stage,
        outcome.walks_used,
        bit_errors,
    )

    files: tuple[Path, ...] = ()
    if trace_dir is not None:
        files = _write_traces(cfg, code, frame, outcome, frame_seed, key, trace_dir)
    return SingleFrame(outcome, frame.codeword, frame.llr_channel, bit_errors, files)


def _write_traces(
    cfg: SimConfig,
    code: LdpcCode,
    frame: TransmittedFrame,
    outcome: DecodeOutcome,
    frame_seed: int,
    key: tuple[int, ...],
    trace_dir: Path,
) -> tuple[Path, ...]:
    trace_dir.mkdir(parents=True, exist_ok=True)
    decoder_cfg = cfg.decoder_config
    walk = generate_walk(code.H, (*key, Stream.TRACE))

    frame_path = trace_dir / "frame.json"
    frame_path.write_text(
        json.dumps(
            {
                "frame_seed": frame_seed,
                "ebn0_db": cfg.ebn0_db[0],
                "codeword": frame.codeword.tolist(),
                "llr_channel": frame.llr_channel.tolist(),
                "outcome": outcome.to_dict(),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    walk_path = trace_dir / "walk.json"
    walk_path.write_text(json.dumps(walk_to_json(walk)) + "\n", encoding="utf-8")

    paths = [frame_path, walk_path]
    for label, disable in (("on", False), ("off", True)):
        result = hmm_iterate(
            frame.llr_channel,
            walk,
            decoder_cfg.iters,
            decoder_cfg.emission,
            disable,
            code.H,
            repeat_rule=decoder_cfg.repeat_rule,
            dedup=decoder_cfg.extended_dedup,
            record_trace=True,
        )
        path = trace_dir / f"trace_repeats_{label}.jsonl"
        lines = []
        for iteration, llr in enumerate(result.trace, start=1):
            hard = hard_decision(llr)
            lines.append(
                json.dumps(
                    {
                        "iteration": iteration,
                        "unsatisfied": int(syndrome(hard, code.H).sum()),
                        "bit_errors": int(np.count_nonzero(hard != frame.codeword)),
                        "llr": llr.tolist(),
                    }
                )
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths.append(path)
    logger.info("Wrote %d trace files to %s", len(paths), trace_dir)
    return tuple(paths)

