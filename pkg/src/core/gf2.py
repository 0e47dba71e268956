"""Dense GF(2) linear algebra on numpy uint8 arrays."""
from __future__ import annotations

import numpy as np
import numpy.typing as npt


def gf2_row_reduce(matrix: npt.ArrayLike) -> tuple[npt.NDArray[np.uint8], list[int]]:
    """Reduce a binary matrix to reduced row-echelon form over GF(2).

    Columns are scanned left to right and the first column with a usable pivot
    is taken, so the pivot list doubles as the column permutation that makes
    the pivot block an identity.

    Returns:
        (R, pivot_cols): R has the shape of the input, pivot_cols lists one
        column per independent row (its length is the GF(2) rank).
    """
    reduced = (np.asarray(matrix, dtype=np.uint8) % 2).copy()
    n_rows, n_cols = reduced.shape
    pivot_cols: list[int] = []
    pivot_row = 0

    for col in range(n_cols):
        if pivot_row == n_rows:
            break
        hits = np.flatnonzero(reduced[pivot_row:, col])
        if hits.size == 0:
            continue
        found = pivot_row + int(hits[0])
        if found != pivot_row:
            reduced[[pivot_row, found]] = reduced[[found, pivot_row]]

        # Clear the column above and below the pivot.
        rows = np.flatnonzero(reduced[:, col])
        rows = rows[rows != pivot_row]
        reduced[rows] ^= reduced[pivot_row]

        pivot_cols.append(col)
        pivot_row += 1

    return reduced, pivot_cols


def gf2_rank(matrix: npt.ArrayLike) -> int:
    """GF(2) rank of a dense binary matrix."""
    _, pivot_cols = gf2_row_reduce(matrix)
    return len(pivot_cols)


def gf2_matmul(left: npt.ArrayLike, right: npt.ArrayLike) -> npt.NDArray[np.uint8]:
    """Matrix product reduced mod 2."""
    product = np.asarray(left, dtype=np.int64) @ np.asarray(right, dtype=np.int64)
    return (product % 2).astype(np.uint8)
