from __future__ import annotations

import numpy as np
import numpy.typing as npt


def ensure_binary_vector(value: npt.ArrayLike, length: int, field_name: str) -> npt.NDArray[np.uint8]:
    """Return `value` as a uint8 0/1 vector, raising if its shape or alphabet is wrong."""
    array = np.asarray(value)
    if array.ndim != 1 or array.shape[0] != length:
        raise ValueError(f"{field_name} must be a vector of length {length}, got shape {array.shape}")
    if array.size and not np.isin(array, (0, 1)).all():
        raise ValueError(f"{field_name} must contain only 0/1 values")
    return array.astype(np.uint8)


def ensure_real_vector(value: npt.ArrayLike, length: int, field_name: str) -> npt.NDArray[np.float64]:
    """Return `value` as a float64 vector of the given length."""
    array = np.asarray(value, dtype=np.float64)
    if array.ndim != 1 or array.shape[0] != length:
        raise ValueError(f"{field_name} must be a vector of length {length}, got shape {array.shape}")
    return array


def ensure_positive(value: int, field_name: str) -> None:
    """Raise if a count is not at least one."""
    if value < 1:
        raise ValueError(f"{field_name} must be >= 1, got {value}")
