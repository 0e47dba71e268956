"""Exception hierarchy shared by the code, decoders and the simulation harness."""
from __future__ import annotations


class HmmLdpcError(Exception):
    """Base class for all library errors."""


class ConstructionFailed(HmmLdpcError):
    """No regular parity-check matrix was found within the restart budget."""


class RankDeficient(HmmLdpcError):
    """H has GF(2) rank below its number of checks; rebuild with another seed."""

    def __init__(self, rank: int, n_checks: int) -> None:
        super().__init__(f"parity-check matrix has rank {rank} < {n_checks}")
        self.rank = rank
        self.n_checks = n_checks


class WalkStalled(HmmLdpcError):
    """The random walk hit its length cap before covering every variable."""


class DegreeMismatch(HmmLdpcError):
    """A state bit does not have exactly two adjacent checks."""


class UncoveredVariable(HmmLdpcError):
    """A variable has no occurrence in the walk."""


class NumericalUnderflow(HmmLdpcError):
    """An unnormalized forward/backward message vanished."""


class ConfigError(HmmLdpcError):
    """Inconsistent decoder or campaign settings."""


class CodeFormatError(HmmLdpcError):
    """A code, alist or fixture document could not be parsed."""
