"""Leave-one-out products of per-bit parity biases over a check.

For a bit with P(1) = p the bias is q = 1 - 2p = -tanh(LLR/2). The probability
that a set of independent bits has even parity is (1 + prod q) / 2, which both
the Tanner-graph check update and the HMM emissions are built on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from src.core.ldpc_code import ParityCheckMatrix

_TINY = 1e-300


def parity_bias(llr: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """q = P(0) - P(1) for each LLR."""
    return -np.tanh(np.asarray(llr, dtype=np.float64) / 2.0)


def even_odd_sums(product: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Column 0: probability of even parity; column 1: odd parity."""
    prod = np.asarray(product, dtype=np.float64)
    return np.stack([0.5 * (1.0 + prod), 0.5 * (1.0 - prod)], axis=-1)


@dataclass(frozen=True, eq=False)
class CheckProducts:
    """Per-check sums of log|q| and counts of negative q, so members can be divided out."""

    log_magnitude: npt.NDArray[np.float64]
    negatives: npt.NDArray[np.int64]

    @classmethod
    def from_edges(
        cls, q_edges: npt.NDArray[np.float64], edge_checks: npt.NDArray[np.int64], n_checks: int
    ) -> "CheckProducts":
        log_mag = np.log(np.maximum(np.abs(q_edges), _TINY))
        negative = (q_edges < 0).astype(np.float64)
        return cls(
            log_magnitude=np.bincount(edge_checks, weights=log_mag, minlength=n_checks),
            negatives=np.rint(np.bincount(edge_checks, weights=negative, minlength=n_checks)).astype(
                np.int64
            ),
        )

    @classmethod
    def from_vars(cls, q: npt.NDArray[np.float64], H: ParityCheckMatrix) -> "CheckProducts":
        return cls.from_edges(q[H.edge_vars], H.edge_checks, H.n_checks)

    def excluding(
        self, checks: npt.NDArray[np.int64], *removed: npt.NDArray[np.float64]
    ) -> npt.NDArray[np.float64]:
        """Product of q over each check in `checks` with the given members' q divided out."""
        log_mag = self.log_magnitude[checks].copy()
        negatives = self.negatives[checks].copy()
        for q in removed:
            log_mag -= np.log(np.maximum(np.abs(q), _TINY))
            negatives -= (q < 0).astype(np.int64)
        return np.where(negatives % 2 == 1, -1.0, 1.0) * np.exp(log_mag)
