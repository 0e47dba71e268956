"""Flooding sum-product decoder on the Tanner graph of H."""
from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np
import numpy.typing as npt

from src.core.channel import LLR_MAX, hard_decision, saturate
from src.core.ldpc_code import ParityCheckMatrix, syndrome
from src.decoders.parity import CheckProducts, parity_bias
from src.utils.validators import ensure_positive, ensure_real_vector


logger = logging.getLogger(__name__)

DEFAULT_BP_ITERS = 250
TANH_CLAMP = 1.0 - 1e-15


@dataclass
class BpWorkspace:
    """Edge messages for one frame, check-major edge order."""

    c2v: npt.NDArray[np.float64]
    v2c: npt.NDArray[np.float64]
    iteration: int = 0

    @classmethod
    def for_matrix(cls, H: ParityCheckMatrix) -> "BpWorkspace":
        return cls(c2v=np.zeros(H.n_edges), v2c=np.zeros(H.n_edges))


@dataclass(frozen=True, eq=False)
class BpResult:
    llr_out: npt.NDArray[np.float64]
    hard: npt.NDArray[np.uint8]
    converged: bool
    iters_used: int
    workspace: BpWorkspace = field(repr=False)


def check_update(v2c: npt.NDArray[np.float64], H: ParityCheckMatrix) -> npt.NDArray[np.float64]:
    """Exact tanh rule: c2v = -2 atanh(prod of the other edges' q)."""
    q = parity_bias(v2c)
    products = CheckProducts.from_edges(q, H.edge_checks, H.n_checks)
    extrinsic = np.clip(products.excluding(H.edge_checks, q), -TANH_CLAMP, TANH_CLAMP)
    return saturate(-2.0 * np.arctanh(extrinsic))


def bp_decode(
    llr_in: npt.ArrayLike,
    H: ParityCheckMatrix,
    max_iters: int = DEFAULT_BP_ITERS,
    workspace: BpWorkspace | None = None,
) -> BpResult:
    """Run flooding BP until the hard decision has zero syndrome or max_iters is reached."""
    ensure_positive(max_iters, "max_iters")
    llr = saturate(ensure_real_vector(llr_in, H.n_vars, "llr_in"))
    ws = workspace or BpWorkspace.for_matrix(H)
    ws.v2c[:] = llr[H.edge_vars]
    posterior = llr
    hard = hard_decision(posterior)

    for iteration in range(1, max_iters + 1):
        ws.c2v[:] = check_update(ws.v2c, H)
        total = llr + np.bincount(H.edge_vars, weights=ws.c2v, minlength=H.n_vars)
        ws.v2c[:] = np.clip(total[H.edge_vars] - ws.c2v, -LLR_MAX, LLR_MAX)
        ws.iteration = iteration
        posterior = saturate(total)
        hard = hard_decision(posterior)
        if not syndrome(hard, H).any():
            return BpResult(posterior, hard, True, iteration, ws)

    logger.debug("BP did not converge in %d iterations", max_iters)
    return BpResult(posterior, hard, False, max_iters, ws)
