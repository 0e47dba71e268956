"""Long Monte Carlo campaigns; run with `pytest -m slow`."""
import pytest

from src.core.config import SimConfig, build_sim_config
from src.sim.fixtures import search_fixtures
from src.sim.harness import FerPoint, run_fer_sweep


pytestmark = pytest.mark.slow

WORKERS = 4


def _campaign(**values: object) -> SimConfig:
    defaults: dict[str, object] = {
        "frame_bits": 128,
        "frames": 2000,
        "workers": WORKERS,
        "record_wall_time": False,
    }
    defaults.update(values)
    return build_sim_config(**defaults)


def test_stage_one_finishes_almost_every_frame_at_n512() -> None:
    cfg = _campaign(frame_bits=512, ebn0_db=[2.7], decoder_config={"stage_mask": [1, 3, 4]})

    (point,) = run_fer_sweep(cfg)

    assert point.stage_counts["2"] == 0
    assert point.stage_counts["1"] / point.frames >= 0.98


def test_staged_decoder_beats_bp_in_the_waterfall() -> None:
    scan = [2.0, 2.5, 3.0, 3.5]
    bp_points = run_fer_sweep(_campaign(ebn0_db=scan, decoder="bp"))
    waterfall = [point for point in bp_points if 0.01 <= point.fer <= 0.2]
    assert len(waterfall) >= 2, [(p.ebn0_db, p.fer) for p in bp_points]
    chosen = waterfall[-2:]

    hmm_points = run_fer_sweep(_campaign(ebn0_db=[p.ebn0_db for p in chosen], decoder="hmm"))

    for bp, hmm in zip(chosen, hmm_points):
        assert hmm.fer < bp.fer, (bp.ebn0_db, bp.fer, hmm.fer)
    assert hmm_points[-1].ci[1] < chosen[-1].ci[0]


def test_more_walks_never_hurt() -> None:
    def sweep(walks: int) -> FerPoint:
        (point,) = run_fer_sweep(_campaign(ebn0_db=[2.5], decoder_config={"max_walks": walks}))
        return point

    few, many = sweep(5), sweep(100)

    assert many.fer <= few.fer
    assert many.mean_walks >= few.mean_walks


def test_chaining_frames_exist_in_the_waterfall() -> None:
    cfg = _campaign(ebn0_db=[2.0], decoder_config={"max_walks": 3, "iters": 3, "bp_iters": 20})

    found = search_fixtures(cfg, ("chaining",), max_frames=1000)

    assert [fixture.kind for fixture in found] == ["chaining"]


def test_fer_falls_with_snr() -> None:
    points = run_fer_sweep(_campaign(ebn0_db=[2.0, 2.5, 3.0, 3.5, 4.0], frames=500))

    for lower, higher in zip(points, points[1:]):
        assert higher.ci[0] <= lower.ci[1], (lower.ebn0_db, higher.ebn0_db)
    assert points[-1].fer <= points[0].fer
