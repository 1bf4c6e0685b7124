"""
Randomized fractional cache placement.

Every EN stores a uniformly random subset of ``floor(mu * L)`` subfiles of
every file in the library. EN, file and subfile indices are 1-based.
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from config import SystemConfig
from errors import ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CacheState:
    """Caching variables ``c[i-1, f-1, l-1]`` and the subfile size in bits."""

    c: np.ndarray
    subfile_size: float

    @property
    def shape(self):
        """``(N, F, L)``."""
        return self.c.shape

    def cached(self, i: int, f: int, l: int) -> bool:
        """Whether EN ``i`` holds subfile ``(f, l)``."""
        return cached(self, i, f, l)

    def stored_bits(self, i: int) -> float:
        """Bits cached by EN ``i``."""
        return float(self.c[i - 1].sum()) * self.subfile_size

    def dump(self) -> str:
        """Text matrix, one line of '0'/'1' per (EN, file)."""
        lines = []
        for row in self.c.reshape(-1, self.c.shape[2]):
            lines.append("".join("1" if x else "0" for x in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str, N: int, F: int, subfile_size: float) -> "CacheState":
        """Inverse of :meth:`dump`."""
        rows: List[List[bool]] = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if set(line) - {"0", "1"}:
                raise ParameterError(f"cache dump line has invalid characters: {line}")
            rows.append([ch == "1" for ch in line])
        if len(rows) != N * F or len({len(r) for r in rows}) != 1:
            raise ParameterError(
                f"cache dump needs {N * F} lines of equal length, got {len(rows)}"
            )
        c = np.array(rows, dtype=bool).reshape(N, F, -1)
        return from_array(c, subfile_size)


def from_array(c: np.ndarray, subfile_size: float) -> CacheState:
    """Wrap a boolean ``(N, F, L)`` array, frozen against later writes."""
    c = np.array(c, dtype=bool)
    if c.ndim != 3:
        raise ParameterError(f"caching variables must be 3-D, got shape {c.shape}")
    c.setflags(write=False)
    return CacheState(c=c, subfile_size=float(subfile_size))


def populate_caches(rng: np.random.Generator, cfg: SystemConfig) -> CacheState:
    """
    Fill every EN cache with the randomized fractional strategy.

    For each (EN, file) pair a random permutation of the subfiles is drawn
    and its first ``floor(mu_i * L)`` entries are cached. A larger ``mu``
    with the same stream therefore caches a superset.

    Args:
        rng: Random stream
        cfg: Scenario parameters

    Returns:
        The caching variables
    """
    c = np.zeros((cfg.N, cfg.F, cfg.L), dtype=bool)
    for i in range(cfg.N):
        keep = cfg.cached_fragments(i + 1)
        for f in range(cfg.F):
            order = rng.permutation(cfg.L)
            c[i, f, order[:keep]] = True

    state = from_array(c, cfg.subfile_size)
    counts = [cfg.cached_fragments(i + 1) for i in range(cfg.N)]
    logger.debug(f"Populated caches: {counts} subfiles per (EN, file)")
    return state


def cached(state: CacheState, i: int, f: int, l: int) -> bool:
    """
    Whether EN ``i`` caches subfile ``(f, l)``.

    Raises:
        ParameterError: If any index is out of range
    """
    N, F, L = state.c.shape
    for name, value, upper in (("EN", i, N), ("file", f, F), ("subfile", l, L)):
        if not 1 <= value <= upper:
            raise ParameterError(f"{name} index must be in [1, {upper}], got {value}")
    return bool(state.c[i - 1, f - 1, l - 1])
