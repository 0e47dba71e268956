"""BPSK over AWGN and log-likelihood ratios.

LLRs follow ln(P(bit=1)/P(bit=0)); bit 0 is sent as +1, so under the all-zero
codeword a positive LLR is a wrong bit.
"""
from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Iterable

import numpy as np
import numpy.typing as npt
from scipy.special import expit, logit

from src.core.seeding import SeedKey, make_rng

LLR_MAX = 30.0
CATASTROPHIC_LLR = 16.0


@dataclass(frozen=True)
class ChannelParams:
    ebn0_db: float
    rate: float
    sigma: float

    @classmethod
    def from_ebn0(cls, ebn0_db: float, rate: float = 0.5) -> "ChannelParams":
        """Unit symbol energy: sigma^2 = 1 / (2 R 10^(Eb/N0 / 10))."""
        if not 0.0 < rate <= 1.0:
            raise ValueError(f"rate must lie in (0, 1], got {rate}")
        sigma = math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))
        return cls(ebn0_db=ebn0_db, rate=rate, sigma=sigma)

    @classmethod
    def noiseless(cls, rate: float = 0.5) -> "ChannelParams":
        return cls(ebn0_db=math.inf, rate=rate, sigma=0.0)

    @property
    def is_noiseless(self) -> bool:
        return self.sigma == 0.0


def saturate(llr: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return np.clip(np.asarray(llr, dtype=np.float64), -LLR_MAX, LLR_MAX)


def modulate(codeword: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Bit 0 -> +1.0, bit 1 -> -1.0."""
    return 1.0 - 2.0 * np.asarray(codeword, dtype=np.float64)


def awgn(
    symbols: npt.ArrayLike, params: ChannelParams, seed: SeedKey | np.random.Generator
) -> npt.NDArray[np.float64]:
    """Add i.i.d. N(0, sigma^2) noise; the noiseless channel passes symbols through."""
    clean = np.asarray(symbols, dtype=np.float64)
    if params.is_noiseless:
        return clean.copy()
    rng = make_rng(seed)
    return clean + rng.normal(0.0, params.sigma, size=clean.shape)


def channel_llr(y: npt.ArrayLike, params: ChannelParams) -> npt.NDArray[np.float64]:
    received = np.asarray(y, dtype=np.float64)
    if params.is_noiseless:
        return -LLR_MAX * np.sign(received)
    return saturate(-2.0 * received / params.sigma**2)


def llr_to_prob(llr: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """P(bit=1) for each LLR."""
    return np.asarray(expit(np.asarray(llr, dtype=np.float64)), dtype=np.float64)


def prob_to_llr(p: npt.ArrayLike) -> npt.NDArray[np.float64]:
    with np.errstate(divide="ignore"):
        return saturate(logit(np.asarray(p, dtype=np.float64)))


def hard_decision(llr: npt.ArrayLike) -> npt.NDArray[np.uint8]:
    """Bit 1 iff the LLR is strictly positive."""
    return (np.asarray(llr) > 0).astype(np.uint8)


def inject_catastrophic(
    llr: npt.ArrayLike,
    codeword: npt.ArrayLike,
    positions: Iterable[int],
    magnitude: float = CATASTROPHIC_LLR,
) -> npt.NDArray[np.float64]:
    """Overwrite the given positions with confidently wrong LLRs."""
    values = np.array(llr, dtype=np.float64)
    bits = np.asarray(codeword)
    index = np.fromiter(positions, dtype=np.int64)
    if index.size and not (0 <= index.min() and index.max() < values.shape[0]):
        raise ValueError(f"positions must lie in [0, {values.shape[0]})")
    values[index] = np.where(bits[index] == 1, -magnitude, magnitude)
    return values
