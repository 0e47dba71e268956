import numpy as np
import pytest

from src.core.ldpc_code import CodeParameters, LdpcCode, ParityCheckMatrix, build_code


@pytest.fixture(scope="session")
def code128() -> LdpcCode:
    return build_code(CodeParameters.for_frame_bits(128), seed=1)


@pytest.fixture(scope="session")
def star_matrix() -> ParityCheckMatrix:
    """Five weight-6 checks: check 0 holds bits 0..5, bits 0 and 1 each sit in two more checks."""
    supports = [
        [0, 1, 2, 3, 4, 5],
        [0, 6, 7, 8, 9, 10],
        [0, 11, 12, 13, 14, 15],
        [1, 16, 17, 18, 19, 20],
        [1, 21, 22, 23, 24, 25],
    ]
    return ParityCheckMatrix.from_supports(supports, 26)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
