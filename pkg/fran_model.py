"""
Scenario model: serving sets, Zipf demand and channel realizations.

All indices in this module (UEs, ENs, files) are 1-based. Arrays that back
the domain objects are 0-based and converted at the accessors.
"""

from dataclasses import dataclass
from typing import FrozenSet, Tuple

import numpy as np

from config import SystemConfig
from errors import ParameterError

# Labels of the per-trial random substreams.
STREAM_CACHE = 0
STREAM_DEMAND = 1
STREAM_CHANNEL = 2


def trial_rng(master_seed: int, trial_index: int, stream: int) -> np.random.Generator:
    """Random generator for one purpose of one Monte Carlo trial.

    The stream is a pure function of ``(master_seed, trial_index, stream)``,
    so changing one scenario parameter leaves the draws of unrelated
    purposes untouched.
    """
    seed_seq = np.random.SeedSequence(
        entropy=master_seed, spawn_key=(trial_index, stream)
    )
    return np.random.default_rng(seed_seq)


def serving_set(k: int, M: int, N: int) -> Tuple[int, ...]:
    """
    ENs that jointly serve UE ``k``.

    The window ``k - floor((M-1)/2) .. k + floor(M/2)`` is used as is for
    interior UEs and shifted to fit ``1..N`` at the network edge, so every
    UE keeps exactly ``M`` serving ENs.

    Args:
        k: UE index in 1..N
        M: Connectivity level in 1..N
        N: Number of EN-UE pairs

    Returns:
        Sorted tuple of M contiguous EN indices containing ``k``

    Examples:
        >>> serving_set(2, 2, 4)
        (2, 3)
        >>> serving_set(4, 2, 4)
        (3, 4)
    """
    if N < 1:
        raise ParameterError(f"N must be positive, got {N}", key="N")
    if not 1 <= M <= N:
        raise ParameterError(f"M must be in [1, {N}], got {M}", key="M")
    if not 1 <= k <= N:
        raise ParameterError(f"UE index must be in [1, {N}], got {k}", key="k")

    start = k - (M - 1) // 2
    start = max(1, min(start, N - M + 1))
    return tuple(range(start, start + M))


def serving_sets(M: int, N: int) -> Tuple[Tuple[int, ...], ...]:
    """Serving sets of all UEs, indexed by ``k - 1``."""
    return tuple(serving_set(k, M, N) for k in range(1, N + 1))


def zipf_pmf(F: int, gamma: float) -> np.ndarray:
    """
    Zipf popularity ``p(f) = c * f**-gamma`` over files ``1..F``.

    Examples:
        >>> zipf_pmf(2, 1.0).tolist()
        [0.6666666666666666, 0.3333333333333333]
    """
    if F < 1:
        raise ParameterError(f"F must be positive, got {F}", key="F")
    if gamma < 0:
        raise ParameterError(f"gamma must be non-negative, got {gamma}", key="gamma")

    weights = np.arange(1, F + 1, dtype=float) ** (-gamma)
    return weights / weights.sum()


@dataclass(frozen=True)
class Demand:
    """Files requested by the UEs in one delivery slot."""

    f: Tuple[int, ...]
    requested: FrozenSet[int]

    @classmethod
    def from_files(cls, files) -> "Demand":
        """Build a demand from a sequence of 1-based file indices."""
        files = tuple(int(x) for x in files)
        if not files or min(files) < 1:
            raise ParameterError("demand needs at least one file index >= 1")
        return cls(f=files, requested=frozenset(files))

    def file_of(self, k: int) -> int:
        """File requested by UE ``k``."""
        return self.f[k - 1]


def sample_demand(rng: np.random.Generator, pmf: np.ndarray, N: int) -> Demand:
    """
    Draw ``N`` i.i.d. requests from ``pmf`` by inverting its CDF.

    Args:
        rng: Random stream
        pmf: File popularity, entry ``f-1`` for file ``f``
        N: Number of UEs

    Returns:
        Demand with the request vector and the set of requested files
    """
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    draws = np.searchsorted(cdf, rng.random(N), side="right")
    draws = np.minimum(draws, len(pmf) - 1)
    return Demand.from_files(draws + 1)


@dataclass(frozen=True)
class ChannelRealization:
    """Channel matrices of one transmission interval.

    ``H[k-1, i-1]`` is the ``nR x nT`` response from EN ``i`` to UE ``k``.
    """

    H: np.ndarray

    @property
    def N(self) -> int:
        return self.H.shape[0]

    @property
    def nR(self) -> int:
        return self.H.shape[2]

    @property
    def nT(self) -> int:
        return self.H.shape[3]

    def block(self, k: int, i: int) -> np.ndarray:
        """Channel from EN ``i`` to UE ``k``."""
        return self.H[k - 1, i - 1]

    def stacked(self, k: int) -> np.ndarray:
        """``[H_k1 ... H_kN]``, the ``nR x N*nT`` channel seen by UE ``k``."""
        return np.concatenate(list(self.H[k - 1]), axis=1)


def path_loss_variances(N: int, alpha: float) -> np.ndarray:
    """``alpha**|k-i|`` for every UE k and EN i."""
    idx = np.arange(N)
    return alpha ** np.abs(idx[:, None] - idx[None, :])


def sample_channel(rng: np.random.Generator, cfg: SystemConfig) -> ChannelRealization:
    """
    Draw every channel entry from CN(0, alpha**|k-i|).

    Real and imaginary parts are independent with half the variance each.
    """
    shape = (cfg.N, cfg.N, cfg.nR, cfg.nT)
    scale = np.sqrt(path_loss_variances(cfg.N, cfg.alpha) / 2.0)[:, :, None, None]
    H = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    H.setflags(write=False)
    return ChannelRealization(H=H)
