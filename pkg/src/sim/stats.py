from __future__ import annotations

import math

from scipy.stats import norm


def confidence_interval(errors: int, frames: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a frame error rate."""
    if frames < 1:
        raise ValueError("frames must be at least 1")
    if not 0 <= errors <= frames:
        raise ValueError(f"errors must lie in [0, {frames}], got {errors}")
    z = float(norm.ppf(0.5 + confidence / 2.0))
    p = errors / frames
    z2n = z * z / frames
    denominator = 1.0 + z2n
    center = (p + z2n / 2.0) / denominator
    half = z * math.sqrt(p * (1.0 - p) / frames + z2n / (4.0 * frames)) / denominator
    low = 0.0 if errors == 0 else max(0.0, center - half)
    high = 1.0 if errors == frames else min(1.0, center + half)
    return low, high
