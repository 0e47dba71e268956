"""Code files: the JSON campaign format and MacKay's alist format."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from src.core.errors import CodeFormatError
from src.core.ldpc_code import CodeParameters, GeneratorMatrix, LdpcCode, ParityCheckMatrix


def code_to_json(code: LdpcCode) -> dict[str, Any]:
    """JSON document pinning H, the column permutation and the rows of P (hex)."""
    P = code.G.parity_block
    return {
        "M": code.H.n_checks,
        "N": code.H.n_vars,
        "seed": code.seed,
        "check_supports": [list(support) for support in code.H.check_supports],
        "perm": code.G.column_permutation.tolist(),
        "P_rows": [np.packbits(row).tobytes().hex() for row in P],
    }


def code_from_json(document: dict[str, Any]) -> LdpcCode:
    try:
        n_checks = int(document["M"])
        n_vars = int(document["N"])
        supports = document["check_supports"]
        permutation = np.array(document["perm"], dtype=np.int64)
        rows = document["P_rows"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CodeFormatError(f"malformed code document: {exc}") from exc

    params = _params_for(supports, n_checks, n_vars)
    H = ParityCheckMatrix.from_supports(supports, n_vars, params)
    width = n_vars - n_checks
    if sorted(permutation.tolist()) != list(range(n_vars)) or len(rows) != width:
        raise CodeFormatError("permutation or P_rows do not match the code dimensions")
    parity_block = np.array(
        [np.unpackbits(np.frombuffer(bytes.fromhex(row), dtype=np.uint8))[:n_checks] for row in rows],
        dtype=np.uint8,
    ).reshape(width, n_checks)
    G = GeneratorMatrix(
        identity_width=width, parity_block=parity_block, column_permutation=permutation
    )
    if not G.is_orthogonal_to(H):
        raise CodeFormatError("stored generator is not orthogonal to H")
    return LdpcCode(H=H, G=G, seed=int(document.get("seed", 0)))


def save_code(code: LdpcCode, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(code_to_json(code)), encoding="utf-8")


def load_code(path: Path) -> LdpcCode:
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CodeFormatError(f"cannot read code file {path}: {exc}") from exc
    return code_from_json(document)


def write_alist(H: ParityCheckMatrix) -> str:
    """Render H in alist format (1-based indices, rows padded with zeros)."""
    col_weights = [len(support) for support in H.var_supports]
    row_weights = [len(support) for support in H.check_supports]
    max_col = max(col_weights, default=0)
    max_row = max(row_weights, default=0)
    lines = [
        f"{H.n_vars} {H.n_checks}",
        f"{max_col} {max_row}",
        " ".join(map(str, col_weights)),
        " ".join(map(str, row_weights)),
    ]
    for support in H.var_supports:
        lines.append(" ".join(str(c + 1) for c in support) + " 0" * (max_col - len(support)))
    for support in H.check_supports:
        lines.append(" ".join(str(v + 1) for v in support) + " 0" * (max_row - len(support)))
    return "\n".join(lines) + "\n"


def read_alist(text: str) -> ParityCheckMatrix:
    """Parse an alist document; the check lists must agree with the column lists."""
    try:
        rows = [[int(token) for token in line.split()] for line in text.splitlines() if line.strip()]
        n_vars, n_checks = rows[0][:2]
        col_weights = rows[2]
        row_weights = rows[3]
        col_lists = rows[4 : 4 + n_vars]
        row_lists = rows[4 + n_vars : 4 + n_vars + n_checks]
    except (IndexError, ValueError) as exc:
        raise CodeFormatError(f"malformed alist: {exc}") from exc
    if n_vars <= 0 or n_checks <= 0:
        raise CodeFormatError("alist dimensions must be positive")
    if len(col_weights) != n_vars or len(row_weights) != n_checks or len(col_lists) != n_vars:
        raise CodeFormatError("alist weight lines do not match the declared dimensions")

    supports: list[list[int]] = [[] for _ in range(n_checks)]
    for var, (weight, entries) in enumerate(zip(col_weights, col_lists)):
        for check in entries[:weight]:
            if not 1 <= check <= n_checks:
                raise CodeFormatError(f"alist row index {check} out of range")
            supports[check - 1].append(var)
    if len(row_lists) == n_checks:
        for check, (weight, entries) in enumerate(zip(row_weights, row_lists)):
            if sorted(v - 1 for v in entries[:weight]) != sorted(supports[check]):
                raise CodeFormatError(f"alist row list {check + 1} disagrees with the column lists")
    try:
        H = ParityCheckMatrix.from_supports(supports, n_vars)
    except ValueError as exc:
        raise CodeFormatError(str(exc)) from exc
    params = _params_for([list(s) for s in H.check_supports], n_checks, n_vars)
    return ParityCheckMatrix.from_supports(H.check_supports, n_vars, params)


def _params_for(supports: list[list[int]], n_checks: int, n_vars: int) -> CodeParameters | None:
    """CodeParameters when the supports describe a regular rate-1/2 code, else None."""
    row_degrees = {len(support) for support in supports}
    if len(row_degrees) != 1 or n_vars != 2 * n_checks:
        return None
    check_degree = row_degrees.pop()
    if (n_checks * check_degree) % n_vars:
        return None
    try:
        return CodeParameters(n_checks, n_vars, check_degree, n_checks * check_degree // n_vars)
    except ValueError:
        return None
