import json
from pathlib import Path

import numpy as np
import pytest

from src.core.config import SimConfig, build_sim_config
from src.core.errors import CodeFormatError, ConfigError
from src.core.ldpc_code import LdpcCode
from src.sim.harness import (
    CSV_HEADER,
    FerPoint,
    FrameRecord,
    csv_text,
    run_fer_sweep,
    run_single_frame,
    stage_table,
    write_json,
)


def _campaign(**values: object) -> SimConfig:
    defaults: dict[str, object] = {
        "ebn0_db": [2.0],
        "frames": 6,
        "decoder": "hmm",
        "decoder_config": {"max_walks": 2, "iters": 2, "bp_iters": 20, "erase_step": 0.1, "erase_max": 0.2},
        "record_wall_time": False,
    }
    defaults.update(values)
    return build_sim_config(**defaults)


@pytest.mark.parametrize("decoder", ["bp", "hmm"])
def test_noiseless_sweep_has_no_errors(code128: LdpcCode, decoder: str) -> None:
    cfg = _campaign(decoder=decoder, noiseless=True, frames=4)

    (point,) = run_fer_sweep(cfg, code128)

    assert point.frames == 4
    assert point.errors == 0
    assert point.stage_counts["1"] == 4
    assert point.fer == 0.0


def test_csv_row_layout() -> None:
    point = FerPoint(ebn0_db=2.5)
    point.add(FrameRecord(frame_index=0, bit_errors=1, stage=1, walks_used=1))
    point.add(FrameRecord(frame_index=1, bit_errors=7, stage="failed", walks_used=10))

    row = point.csv_row()
    text = csv_text([point])

    assert row.startswith("2.5,2,1,5.000000e-01,")
    assert row.endswith(",1,0,0,0,1,5.500,0.000")
    assert text.splitlines()[0] == CSV_HEADER
    assert len(row.split(",")) == len(CSV_HEADER.split(","))


def test_bit_errors_up_to_two_are_not_frame_errors() -> None:
    assert not FrameRecord(0, 2, 1, 1).frame_error
    assert FrameRecord(0, 3, 1, 1).frame_error


def test_stage_counts_sum_to_frames(code128: LdpcCode) -> None:
    cfg = _campaign(ebn0_db=[1.0, 2.0], frames=5)

    points = run_fer_sweep(cfg, code128)

    assert [p.ebn0_db for p in points] == [1.0, 2.0]
    for point in points:
        assert sum(point.stage_counts.values()) == point.frames == 5
        assert point.wall_s == 0.0


def test_sweep_is_deterministic(code128: LdpcCode) -> None:
    cfg = _campaign(decoder="bp", ebn0_db=[0.5, 1.5], frames=12, batch_frames=5)

    first = csv_text(run_fer_sweep(cfg, code128))
    second = csv_text(run_fer_sweep(cfg, code128))

    assert first == second


def test_results_do_not_depend_on_workers(code128: LdpcCode) -> None:
    serial = _campaign(decoder="bp", ebn0_db=[1.0], frames=10, workers=1, batch_frames=3)
    parallel = serial.model_copy(update={"workers": 2})

    assert csv_text(run_fer_sweep(serial, code128)) == csv_text(run_fer_sweep(parallel, code128))


def test_min_errors_is_independent_of_batch_size(code128: LdpcCode) -> None:
    small = _campaign(decoder="bp", ebn0_db=[0.0], frames=40, min_errors=3, batch_frames=1)
    large = small.model_copy(update={"batch_frames": 64})

    (a,) = run_fer_sweep(small, code128)
    (b,) = run_fer_sweep(large, code128)

    assert a.to_dict() == b.to_dict()
    assert a.errors <= 3


def test_very_low_snr_bp_fails_nearly_always(code128: LdpcCode) -> None:
    cfg = _campaign(decoder="bp", ebn0_db=[-5.0], frames=40)

    (point,) = run_fer_sweep(cfg, code128)

    assert point.fer >= 0.95


def test_sweep_writes_outputs(code128: LdpcCode, tmp_path: Path) -> None:
    cfg = _campaign(
        decoder="bp",
        noiseless=True,
        frames=2,
        out_csv=tmp_path / "out" / "fer.csv",
        out_json=tmp_path / "out" / "fer.json",
    )

    run_fer_sweep(cfg, code128)

    assert (tmp_path / "out" / "fer.csv").read_text(encoding="utf-8").startswith(CSV_HEADER)
    document = json.loads((tmp_path / "out" / "fer.json").read_text(encoding="utf-8"))
    assert document["config"]["decoder"] == "bp"
    assert document["points"][0]["frames"] == 2


def test_write_json_round_trips_points(tmp_path: Path) -> None:
    point = FerPoint(ebn0_db=3.0)
    point.add(FrameRecord(0, 0, 2, 3))
    path = tmp_path / "points.json"

    write_json([point], _campaign(), path)

    document = json.loads(path.read_text(encoding="utf-8"))
    assert document["points"][0]["stage_counts"]["2"] == 1
    assert document["points"][0]["mean_walks"] == 3.0


def test_missing_code_file_is_reported(tmp_path: Path) -> None:
    cfg = _campaign(code_file=tmp_path / "missing.json")

    with pytest.raises(CodeFormatError):
        run_fer_sweep(cfg)


def test_stage_table_rows() -> None:
    point = FerPoint(ebn0_db=2.7)
    for stage in (1, 1, 3, "failed"):
        point.add(FrameRecord(0, 0, stage, 1))  # type: ignore[arg-type]

    rows = stage_table(point)

    assert rows[0] == ("Decoded in Stage 1", 2)
    assert rows[2] == ("Decoded in Stage 3", 1)
    assert rows[4] == ("Failed", 1)
    assert rows[5] == ("Total Simulated Frames", 4)


def test_single_frame_is_reproducible(code128: LdpcCode) -> None:
    cfg = _campaign(ebn0_db=[2.5])

    first = run_single_frame(cfg, frame_seed=7, code=code128)
    second = run_single_frame(cfg, frame_seed=7, code=code128)

    assert first.outcome.stage == second.outcome.stage
    assert np.array_equal(first.outcome.hard, second.outcome.hard)
    assert np.array_equal(first.llr_channel, second.llr_channel)
    assert first.trace_files == ()


def test_single_frame_writes_traces(code128: LdpcCode, tmp_path: Path) -> None:
    cfg = _campaign(ebn0_db=[2.5])

    result = run_single_frame(cfg, frame_seed=3, trace_dir=tmp_path, code=code128)

    names = sorted(path.name for path in result.trace_files)
    assert names == ["frame.json", "trace_repeats_off.jsonl", "trace_repeats_on.jsonl", "walk.json"]
    frame = json.loads((tmp_path / "frame.json").read_text(encoding="utf-8"))
    assert frame["frame_seed"] == 3
    assert len(frame["codeword"]) == 128
    for label in ("on", "off"):
        lines = (tmp_path / f"trace_repeats_{label}.jsonl").read_text(encoding="utf-8").splitlines()
        records = [json.loads(line) for line in lines]
        assert [r["iteration"] for r in records] == list(range(1, len(records) + 1))
        assert 1 <= len(records) <= 2
        assert all(len(r["llr"]) == 128 for r in records)


def test_single_frame_with_a_catastrophic_bit(code128: LdpcCode) -> None:
    cfg = _campaign(ebn0_db=[4.0])

    plain = run_single_frame(cfg, frame_seed=2, code=code128)
    hit = run_single_frame(cfg, frame_seed=2, code=code128, catastrophic=[10])

    wrong = 16.0 if plain.codeword[10] == 0 else -16.0
    assert hit.llr_channel[10] == wrong
    assert np.array_equal(np.delete(hit.llr_channel, 10), np.delete(plain.llr_channel, 10))
    with pytest.raises(ConfigError):
        run_single_frame(cfg, frame_seed=2, code=code128, catastrophic=[128])
