from pathlib import Path

import pytest

from src.core.config import (
    DecoderConfig,
    Settings,
    build_decoder_config,
    build_sim_config,
    default_sim_values,
    load_sim_config,
    merge_sim_values,
)
from src.core.errors import ConfigError


def test_decoder_defaults() -> None:
    config = DecoderConfig()

    assert config.max_walks == 100
    assert config.iters == 5
    assert config.bp_iters == 250
    assert config.erase_step == 0.02
    assert config.erase_max == 0.20
    assert config.stage_mask == (1, 2, 3, 4)
    assert not config.repair2


def test_stage_mask_is_sorted_and_validated() -> None:
    assert build_decoder_config(stage_mask=(4, 1, 3, 1)).stage_mask == (1, 3, 4)
    with pytest.raises(ConfigError):
        build_decoder_config(stage_mask=(5,))
    with pytest.raises(ConfigError):
        build_decoder_config(stage_mask=())


def test_erase_fractions_are_bounded() -> None:
    with pytest.raises(ConfigError):
        build_decoder_config(erase_max=0.3)
    with pytest.raises(ConfigError):
        build_decoder_config(erase_step=0.1, erase_max=0.05)


def test_sim_config_requires_points_and_even_frames() -> None:
    with pytest.raises(ConfigError):
        build_sim_config(ebn0_db=[])
    with pytest.raises(ConfigError):
        build_sim_config(ebn0_db=[2.0], frame_bits=127)
    with pytest.raises(ConfigError):
        build_sim_config(ebn0_db=[2.0], frames=0)

    cfg = build_sim_config(ebn0_db=[2.0])
    assert cfg.decoder == "hmm"
    assert cfg.decoder_config == DecoderConfig()


def test_yaml_campaign_with_overrides(tmp_path: Path) -> None:
    path = tmp_path / "campaign.yaml"
    path.write_text(
        "ebn0_db: [2.0, 2.5]\nframes: 40\ndecoder: bp\ndecoder_config:\n  max_walks: 5\n  stage_mask: [1, 3, 4]\n",
        encoding="utf-8",
    )

    cfg = load_sim_config(path, frames=10, workers=None, decoder_config={"iters": 3})

    assert cfg.ebn0_db == [2.0, 2.5]
    assert cfg.frames == 10
    assert cfg.workers == 1
    assert cfg.decoder == "bp"
    assert cfg.decoder_config.max_walks == 5
    assert cfg.decoder_config.iters == 3
    assert cfg.decoder_config.stage_mask == (1, 3, 4)


def test_unreadable_campaign_file(tmp_path: Path) -> None:
    path = tmp_path / "campaign.yaml"
    path.write_text("- just\n- a list\n", encoding="utf-8")

    with pytest.raises(ConfigError):
        load_sim_config(path)
    with pytest.raises(ConfigError):
        load_sim_config(tmp_path / "missing.yaml")


def test_merge_layers_later_wins_and_skips_none() -> None:
    merged = merge_sim_values(
        {"frames": 5, "decoder_config": {"max_walks": 100, "iters": 5}},
        {"frames": None, "decoder_config": {"max_walks": 7, "iters": None}},
    )

    assert merged == {"frames": 5, "decoder_config": {"max_walks": 7, "iters": 5}}


def test_settings_read_prefixed_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("HMM_LDPC_FRAME_BITS", "512")
    monkeypatch.setenv("HMM_LDPC_MAX_WALKS", "5")

    env = Settings()
    values = default_sim_values(env)

    assert env.frame_bits == 512
    assert values["frame_bits"] == 512
    assert values["decoder_config"]["max_walks"] == 5
