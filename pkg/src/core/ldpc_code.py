from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import logging
from typing import Iterable, Sequence

import numpy as np
import numpy.typing as npt

from src.core.errors import ConstructionFailed, RankDeficient
from src.core.gf2 import gf2_matmul, gf2_row_reduce
from src.core.seeding import SeedKey, derive_seed, make_rng
from src.utils.validators import ensure_binary_vector


logger = logging.getLogger(__name__)

MAX_RESTARTS = 1000
SWAPS_PER_EDGE = 20
DEFAULT_FRAME_BITS = (128, 260, 512)


@dataclass(frozen=True)
class CodeParameters:
    """Shape of a rate-1/2 regular LDPC code."""

    n_checks: int
    n_vars: int
    check_degree: int = 6
    var_degree: int = 3

    def __post_init__(self) -> None:
        if self.n_checks < 1 or self.n_vars < 2:
            raise ValueError("code needs at least one check and two variables")
        if self.n_vars != 2 * self.n_checks:
            raise ValueError(f"N must equal 2M, got M={self.n_checks} N={self.n_vars}")
        if self.n_checks * self.check_degree != self.n_vars * self.var_degree:
            raise ValueError(
                f"edge counts disagree: {self.n_checks}*{self.check_degree} != "
                f"{self.n_vars}*{self.var_degree}"
            )
        if self.check_degree > self.n_vars:
            raise ValueError("check degree exceeds the number of variables")

    @classmethod
    def for_frame_bits(cls, frame_bits: int, check_degree: int = 6, var_degree: int = 3) -> "CodeParameters":
        return cls(frame_bits // 2, frame_bits, check_degree, var_degree)

    @property
    def rate(self) -> float:
        return (self.n_vars - self.n_checks) / self.n_vars

    @property
    def n_edges(self) -> int:
        return self.n_checks * self.check_degree


@dataclass(frozen=True)
class ParityCheckMatrix:
    """Sparse H kept as adjacency lists in both orientations."""

    n_checks: int
    n_vars: int
    check_supports: tuple[tuple[int, ...], ...]
    var_supports: tuple[tuple[int, ...], ...]
    params: CodeParameters | None = None

    @classmethod
    def from_supports(
        cls,
        check_supports: Iterable[Iterable[int]],
        n_vars: int,
        params: CodeParameters | None = None,
    ) -> "ParityCheckMatrix":
        checks = tuple(tuple(sorted(int(v) for v in support)) for support in check_supports)
        per_var: list[list[int]] = [[] for _ in range(n_vars)]
        for check, support in enumerate(checks):
            if len(set(support)) != len(support):
                raise ValueError(f"check {check} repeats a variable")
            for var in support:
                if not 0 <= var < n_vars:
                    raise ValueError(f"check {check} references variable {var} outside [0, {n_vars})")
                per_var[var].append(check)
        return cls(
            n_checks=len(checks),
            n_vars=n_vars,
            check_supports=checks,
            var_supports=tuple(tuple(support) for support in per_var),
            params=params,
        )

    @classmethod
    def from_dense(cls, matrix: npt.ArrayLike) -> "ParityCheckMatrix":
        dense = np.asarray(matrix) % 2
        supports = [np.flatnonzero(row).tolist() for row in dense]
        return cls.from_supports(supports, dense.shape[1])

    @cached_property
    def dense(self) -> npt.NDArray[np.uint8]:
        matrix = np.zeros((self.n_checks, self.n_vars), dtype=np.uint8)
        matrix[self.edge_checks, self.edge_vars] = 1
        return matrix

    @cached_property
    def edge_checks(self) -> npt.NDArray[np.int64]:
        """Check endpoint of every edge, check-major order."""
        return np.repeat(
            np.arange(self.n_checks, dtype=np.int64),
            [len(support) for support in self.check_supports],
        )

    @cached_property
    def edge_vars(self) -> npt.NDArray[np.int64]:
        """Variable endpoint of every edge, check-major order."""
        return np.fromiter(
            (var for support in self.check_supports for var in support), dtype=np.int64
        )

    @property
    def n_edges(self) -> int:
        return int(self.edge_vars.shape[0])

    @property
    def check_degree(self) -> int | None:
        degrees = {len(support) for support in self.check_supports}
        return degrees.pop() if len(degrees) == 1 else None

    @property
    def var_degree(self) -> int | None:
        degrees = {len(support) for support in self.var_supports}
        return degrees.pop() if len(degrees) == 1 else None

    @property
    def is_regular(self) -> bool:
        return self.check_degree is not None and self.var_degree is not None

    def count_4cycles(self) -> int:
        """Number of check pairs sharing two or more variables."""
        overlap = self.dense.astype(np.int64) @ self.dense.T.astype(np.int64)
        np.fill_diagonal(overlap, 0)
        return int(np.count_nonzero(np.triu(overlap) >= 2))


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Systematic generator [I P] plus the column order it is written in.

    column_permutation[k] is the column of H that systematic column k lands on.
    """

    identity_width: int
    parity_block: npt.NDArray[np.uint8]
    column_permutation: npt.NDArray[np.int64]

    @property
    def n_vars(self) -> int:
        return int(self.column_permutation.shape[0])

    def systematic(self) -> npt.NDArray[np.uint8]:
        return np.hstack(
            [np.eye(self.identity_width, dtype=np.uint8), self.parity_block.astype(np.uint8)]
        )

    def dense(self) -> npt.NDArray[np.uint8]:
        """G with its columns in H's column order."""
        matrix = np.zeros((self.identity_width, self.n_vars), dtype=np.uint8)
        matrix[:, self.column_permutation] = self.systematic()
        return matrix

    def is_orthogonal_to(self, H: ParityCheckMatrix) -> bool:
        return not gf2_matmul(self.dense(), H.dense.T).any()


@dataclass(frozen=True)
class LdpcCode:
    """A constructed code: H, its generator and the seed that produced it."""

    H: ParityCheckMatrix
    G: GeneratorMatrix
    seed: int

    @property
    def n_vars(self) -> int:
        return self.H.n_vars

    @property
    def n_info(self) -> int:
        return self.G.identity_width

    @property
    def rate(self) -> float:
        return self.n_info / self.n_vars


class _SocketGraph:
    """Configuration-model multigraph repaired by degree-preserving edge swaps."""

    def __init__(
        self,
        n_checks: int,
        n_vars: int,
        edge_checks: npt.NDArray[np.int64],
        edge_vars: npt.NDArray[np.int64],
    ) -> None:
        self.edge_checks = edge_checks
        self.edge_vars = edge_vars
        self.counts = np.zeros((n_checks, n_vars), dtype=np.int64)
        np.add.at(self.counts, (edge_checks, edge_vars), 1)
        self.overlap = self.counts @ self.counts.T

    @classmethod
    def random(cls, params: CodeParameters, rng: np.random.Generator) -> "_SocketGraph":
        edge_checks = np.repeat(np.arange(params.n_checks, dtype=np.int64), params.check_degree)
        sockets = np.repeat(np.arange(params.n_vars, dtype=np.int64), params.var_degree)
        return cls(params.n_checks, params.n_vars, edge_checks, rng.permutation(sockets))

    def bad_edges(self, avoid_4cycles: bool) -> npt.NDArray[np.int64]:
        duplicate = self.counts[self.edge_checks, self.edge_vars] > 1
        if not avoid_4cycles:
            return np.flatnonzero(duplicate)
        clash = self.overlap >= 2
        np.fill_diagonal(clash, False)
        in_cycle = (clash[self.edge_checks] & (self.counts[:, self.edge_vars].T > 0)).any(axis=1)
        return np.flatnonzero(duplicate | in_cycle)

    def repair(self, rng: np.random.Generator, avoid_4cycles: bool, budget: int) -> bool:
        bad = self.bad_edges(avoid_4cycles)
        n_edges = self.edge_vars.shape[0]
        for _ in range(budget):
            if bad.size == 0:
                return True
            if self._try_swap(int(rng.choice(bad)), int(rng.integers(n_edges)), avoid_4cycles):
                bad = self.bad_edges(avoid_4cycles)
        return bad.size == 0

    def to_matrix(self, params: CodeParameters) -> ParityCheckMatrix:
        supports: list[list[int]] = [[] for _ in range(params.n_checks)]
        for check, var in zip(self.edge_checks.tolist(), self.edge_vars.tolist()):
            supports[check].append(var)
        return ParityCheckMatrix.from_supports(supports, params.n_vars, params)

    def _try_swap(self, first: int, second: int, avoid_4cycles: bool) -> bool:
        """Exchange the variable endpoints of two edges; keep only if both new edges are clean."""
        c1, v1 = int(self.edge_checks[first]), int(self.edge_vars[first])
        c2, v2 = int(self.edge_checks[second]), int(self.edge_vars[second])
        if c1 == c2 or v1 == v2:
            return False
        self._move(c1, v1, v2)
        self._move(c2, v2, v1)
        if self._edge_is_bad(c1, v2, avoid_4cycles) or self._edge_is_bad(c2, v1, avoid_4cycles):
            self._move(c2, v1, v2)
            self._move(c1, v2, v1)
            return False
        self.edge_vars[first], self.edge_vars[second] = v2, v1
        return True

    def _move(self, check: int, old: int, new: int) -> None:
        self._remove(check, old)
        self._add(check, new)

    def _remove(self, check: int, var: int) -> None:
        column = self.counts[:, var].copy()
        self.overlap[check, :] -= column
        self.overlap[:, check] -= column
        self.overlap[check, check] += 1
        self.counts[check, var] -= 1

    def _add(self, check: int, var: int) -> None:
        column = self.counts[:, var].copy()
        self.overlap[check, :] += column
        self.overlap[:, check] += column
        self.overlap[check, check] += 1
        self.counts[check, var] += 1

    def _edge_is_bad(self, check: int, var: int, avoid_4cycles: bool) -> bool:
        if self.counts[check, var] > 1:
            return True
        if not avoid_4cycles:
            return False
        partners = np.flatnonzero(self.counts[:, var])
        partners = partners[partners != check]
        return bool((self.overlap[check, partners] >= 2).any())


def construct_regular_code(
    params: CodeParameters, seed: SeedKey, max_restarts: int = MAX_RESTARTS
) -> ParityCheckMatrix:
    """Sample a regular H from the configuration model, free of double edges and 4-cycles.

    4-cycles are only removed when the degrees allow it: a check reaches
    s*(var_degree-1) other checks through its variables, which must fit in M-1.
    """
    rng = make_rng(seed)
    avoid_4cycles = params.check_degree * (params.var_degree - 1) <= params.n_checks - 1
    if not avoid_4cycles:
        logger.warning(
            "A 4-cycle-free (%d,%d) code with %d checks does not exist; removing double edges only",
            params.var_degree,
            params.check_degree,
            params.n_checks,
        )
    budget = SWAPS_PER_EDGE * params.n_edges
    fallback: ParityCheckMatrix | None = None

    for restart in range(max_restarts):
        graph = _SocketGraph.random(params, rng)
        if graph.repair(rng, avoid_4cycles, budget):
            if restart:
                logger.debug("Code construction succeeded after %d restarts", restart)
            return graph.to_matrix(params)
        if fallback is None and avoid_4cycles and graph.bad_edges(False).size == 0:
            fallback = graph.to_matrix(params)

    if fallback is not None:
        logger.warning(
            "No 4-cycle-free code found in %d restarts; using a simple graph with %d 4-cycles",
            max_restarts,
            fallback.count_4cycles(),
        )
        return fallback
    raise ConstructionFailed(
        f"no regular ({params.var_degree},{params.check_degree}) matrix with M={params.n_checks} "
        f"found in {max_restarts} restarts"
    )


def derive_generator(H: ParityCheckMatrix) -> GeneratorMatrix:
    """Systematic G = [I P] with G H^T = 0, found by elimination with column pivoting.

    H itself is left untouched; the pivot columns carry the parity bits and the
    remaining columns carry the information bits.
    """
    reduced, pivots = gf2_row_reduce(H.dense)
    if len(pivots) < H.n_checks:
        raise RankDeficient(len(pivots), H.n_checks)
    pivot_set = set(pivots)
    free = [col for col in range(H.n_vars) if col not in pivot_set]
    parity_block = np.ascontiguousarray(reduced[:, free].T)
    permutation = np.array(free + pivots, dtype=np.int64)
    return GeneratorMatrix(
        identity_width=len(free), parity_block=parity_block, column_permutation=permutation
    )


def build_code(params: CodeParameters, seed: int, max_attempts: int = 50) -> LdpcCode:
    """Construct H and G, retrying rank-deficient draws with derived seeds."""
    failure: RankDeficient | None = None
    for attempt in range(max_attempts):
        attempt_seed = seed if attempt == 0 else derive_seed((seed, attempt))
        H = construct_regular_code(params, attempt_seed)
        try:
            G = derive_generator(H)
        except RankDeficient as exc:
            logger.warning("Code seed %s is rank deficient (%s), retrying", attempt_seed, exc)
            failure = exc
            continue
        return LdpcCode(H=H, G=G, seed=attempt_seed)
    assert failure is not None
    raise failure


def encode(u: npt.ArrayLike, G: GeneratorMatrix) -> npt.NDArray[np.uint8]:
    """Codeword [u, uP] placed back into H's column order."""
    info = ensure_binary_vector(u, G.identity_width, "u")
    systematic = np.concatenate([info, gf2_matmul(info, G.parity_block)])
    codeword = np.empty(G.n_vars, dtype=np.uint8)
    codeword[G.column_permutation] = systematic
    return codeword


def info_bits(codeword: npt.ArrayLike, G: GeneratorMatrix) -> npt.NDArray[np.uint8]:
    bits = ensure_binary_vector(codeword, G.n_vars, "codeword")
    return bits[G.column_permutation[: G.identity_width]]


def syndrome(c: npt.ArrayLike, H: ParityCheckMatrix) -> npt.NDArray[np.uint8]:
    """Per-check XOR of c over the check's support."""
    bits = np.asarray(c, dtype=np.int64)
    if bits.shape != (H.n_vars,):
        raise ValueError(f"c must be a vector of length {H.n_vars}, got shape {bits.shape}")
    ones = np.bincount(H.edge_checks, weights=bits[H.edge_vars], minlength=H.n_checks)
    return (ones.astype(np.int64) % 2).astype(np.uint8)


def flip_bits(c: npt.ArrayLike, positions: Sequence[int]) -> npt.NDArray[np.uint8]:
    flipped = np.array(c, dtype=np.uint8, copy=True)
    flipped[list(positions)] ^= 1
    return flipped
