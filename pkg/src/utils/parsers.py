"""Parsers for compact command-line values."""
from __future__ import annotations

import math


def parse_ebn0(value: str) -> list[float]:
    """Parse `a:b:step` (inclusive range) or a comma-separated list of Eb/N0 values in dB."""
    text = value.strip()
    if not text:
        raise ValueError("empty Eb/N0 value")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:step, got {value!r}")
        start, stop, step = (float(part) for part in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"invalid Eb/N0 range {value!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 10) for k in range(count)]
    return [float(item) for item in text.split(",") if item.strip()]


def parse_stage_mask(value: str) -> tuple[int, ...]:
    """Parse a stage mask such as `1,3,4`."""
    stages = tuple(sorted({int(item) for item in value.split(",") if item.strip()}))
    if not stages or any(stage not in (1, 2, 3, 4) for stage in stages):
        raise ValueError(f"stage mask must name stages from 1..4, got {value!r}")
    return stages
