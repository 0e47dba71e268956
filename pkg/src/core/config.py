from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Mapping

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.core.errors import ConfigError


EmissionMode = Literal["simple", "extended"]
RepeatRule = Literal["occurrence", "revisit"]
DecoderKind = Literal["bp", "hmm"]


class Settings(BaseSettings):
    """Process defaults loaded from environment variables and `.env`."""

    # Code
    frame_bits: int = 128
    code_seed: int = 1

    # Decoder
    max_walks: int = 100
    hmm_iters: int = 5
    bp_iters: int = 250
    erase_step: float = 0.02
    erase_max: float = 0.20

    # Campaign
    master_seed: int = 0
    workers: int = 1
    log_dir: str = "logs"
    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="HMM_LDPC_", env_file=".env", case_sensitive=False, extra="ignore"
    )


class DecoderConfig(BaseModel):
    """Knobs of the staged HMM decoder; defaults follow the published settings."""

    model_config = ConfigDict(frozen=True)

    max_walks: int = Field(100, ge=1)
    iters: int = Field(5, ge=1)
    bp_iters: int = Field(250, ge=1)
    erase_step: float = Field(0.02, gt=0.0, le=0.2)
    erase_max: float = Field(0.20, gt=0.0, le=0.2)
    stage_mask: tuple[int, ...] = (1, 2, 3, 4)
    repair2: bool = False
    disable_repeats: bool = False
    repeat_rule: RepeatRule = "occurrence"
    extended_dedup: bool = False
    emission: EmissionMode = "simple"

    @field_validator("stage_mask")
    @classmethod
    def _check_stages(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value:
            raise ValueError("stage_mask must enable at least one stage")
        unknown = set(value) - {1, 2, 3, 4}
        if unknown:
            raise ValueError(f"unknown stages in stage_mask: {sorted(unknown)}")
        return tuple(sorted(set(value)))

    @model_validator(mode="after")
    def _check_erasures(self) -> "DecoderConfig":
        if self.erase_step > self.erase_max + 1e-12:
            raise ValueError("erase_step must not exceed erase_max")
        return self


class SimConfig(BaseModel):
    """A Monte Carlo campaign: code source, operating points and decoder."""

    code_file: Path | None = None
    frame_bits: int = Field(128, ge=4)
    code_seed: int = 1
    ebn0_db: list[float]
    frames: int = Field(1000, ge=1)
    min_errors: int | None = Field(None, ge=1)
    decoder: DecoderKind = "hmm"
    decoder_config: DecoderConfig = Field(default_factory=DecoderConfig)
    master_seed: int = 0
    workers: int = Field(1, ge=1)
    batch_frames: int = Field(64, ge=1)
    noiseless: bool = False
    record_wall_time: bool = True
    out_csv: Path | None = None
    out_json: Path | None = None

    @field_validator("ebn0_db")
    @classmethod
    def _check_points(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("ebn0 list must not be empty")
        return value

    @model_validator(mode="after")
    def _check_code(self) -> "SimConfig":
        if self.code_file is None and self.frame_bits % 2:
            raise ValueError("frame_bits must be even for a rate-1/2 code")
        return self


def build_sim_config(**values: Any) -> SimConfig:
    """Validate campaign values, reporting problems as ConfigError."""
    try:
        return SimConfig(**values)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def build_decoder_config(**values: Any) -> DecoderConfig:
    try:
        return DecoderConfig(**values)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def read_campaign_file(path: Path) -> dict[str, Any]:
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read campaign file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"campaign file {path} must contain a mapping")
    return data


def default_sim_values(source: Settings | None = None) -> dict[str, Any]:
    """Campaign values taken from the environment settings."""
    source = source or settings
    return {
        "frame_bits": source.frame_bits,
        "code_seed": source.code_seed,
        "master_seed": source.master_seed,
        "workers": source.workers,
        "decoder_config": {
            "max_walks": source.max_walks,
            "iters": source.hmm_iters,
            "bp_iters": source.bp_iters,
            "erase_step": source.erase_step,
            "erase_max": source.erase_max,
        },
    }


def merge_sim_values(*layers: Mapping[str, Any]) -> dict[str, Any]:
    """Later layers win; None values are skipped and decoder_config merges per key."""
    merged: dict[str, Any] = {}
    for layer in layers:
        for key, value in layer.items():
            if value is None:
                continue
            if key == "decoder_config" and isinstance(value, Mapping):
                decoder = dict(merged.get(key, {}))
                decoder.update({k: v for k, v in value.items() if v is not None})
                merged[key] = decoder
            else:
                merged[key] = value
    return merged


def load_sim_config(path: Path, **overrides: Any) -> SimConfig:
    """Read a YAML campaign file; non-None overrides win over file values."""
    return build_sim_config(**merge_sim_values(read_campaign_file(path), overrides))


settings = Settings()
