"""
Max-min rate multi-connectivity beamforming on the edge link.

UE ``k`` decodes its streams treating all other UEs' signals as noise, so
its rate is ``g_k = f1_k - f2_k`` with

    f1_k = log2 det(I + sum_l H_k V~_l H_k^H)
    f2_k = log2 det(I + sum_{l != k} H_k V~_l H_k^H)

over the covariances ``V~_l = V_l V_l^H``. Both terms are concave, so the
max-min problem is a difference of concave functions. The CCCP replaces
``f2_k`` by its tangent plane at the current point and maximizes the
resulting concave lower bound; the true minimum rate never decreases.

Each covariance is kept only on the block of its serving ENs, which makes
the connectivity constraint structural.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from config import SolverParams, SystemConfig
from errors import NumericDomainError, ParameterError
from fran_model import ChannelRealization

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)


def _hermitian(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.conj().T)


def _cholesky(X: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.cholesky(_hermitian(X), lower=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericDomainError(f"matrix is not positive definite: {e}") from e


def log2det(X: np.ndarray) -> float:
    """``log2 det(X)`` of a positive-definite matrix via its Cholesky factor."""
    chol = _cholesky(X)
    return float(2.0 * np.sum(np.log(np.diag(chol).real)) / LN2)


def phi(A: np.ndarray, B: np.ndarray) -> float:
    """
    ``log2 det(A + B) - log2 det(B)`` for PSD ``A`` and PD ``B``.

    Examples:
        >>> round(phi(np.array([[4.0]]), np.array([[1.0]])), 6)
        2.321928

    Raises:
        NumericDomainError: If ``B`` is not positive definite
        ParameterError: If the shapes differ
    """
    A = np.atleast_2d(np.asarray(A))
    B = np.atleast_2d(np.asarray(B))
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ParameterError(
            f"phi needs square matrices of equal size: {A.shape}, {B.shape}"
        )
    base = log2det(B)
    return max(0.0, log2det(A + B) - base)


@dataclass(frozen=True)
class PrecoderSet:
    """Per-UE precoders and the covariances they were extracted from.

    ``V[k-1]`` is ``N*nT x nS`` with zero rows outside the serving ENs of
    UE ``k``; ``Vtilde[k-1]`` is the covariance on the serving block only.
    """

    V: Tuple[np.ndarray, ...]
    support: Tuple[Tuple[int, ...], ...]
    Vtilde: Tuple[np.ndarray, ...]
    nT: int

    def en_power(self, i: int) -> float:
        """Transmit power of EN ``i`` summed over all UEs."""
        rows = slice((i - 1) * self.nT, i * self.nT)
        return float(sum(np.sum(np.abs(V[rows]) ** 2) for V in self.V))


def user_rate(k: int, prec: PrecoderSet, ch: ChannelRealization) -> float:
    """
    Achievable rate of UE ``k`` treating interference as noise.

    Examples:
        Point-to-point link with power ``P`` and gain ``|h|**2`` gives
        ``log2(1 + P |h|**2)``.
    """
    if len(prec.V) != ch.N:
        raise ParameterError(f"{len(prec.V)} precoders for {ch.N} UEs")
    Hk = ch.stacked(k)
    received = [Hk @ V for V in prec.V]
    signal = received[k - 1] @ received[k - 1].conj().T
    noise = np.eye(ch.nR, dtype=complex)
    for l, Y in enumerate(received, start=1):
        if l != k:
            noise = noise + Y @ Y.conj().T
    return phi(signal, noise)


def grid_search_min_rate(
    gains: np.ndarray, power: float, resolution: int = 2000
) -> Tuple[float, Tuple[float, float]]:
    """
    Best min-rate of a two-user scalar interference channel by grid search.

    Each UE is served by its own EN only (M = 1) and ``gains[k, i]`` is the
    power gain from EN ``i`` to UE ``k`` (0-based). Both powers range over
    ``[0, power]`` in ``resolution`` steps.

    Returns:
        The best min-rate and the powers ``(p1, p2)`` that attain it
    """
    gains = np.asarray(gains, dtype=float)
    if gains.shape != (2, 2):
        raise ParameterError(f"grid search needs 2x2 gains, got {gains.shape}")
    p = np.linspace(0.0, power, resolution + 1)
    p1, p2 = np.meshgrid(p, p, indexing="ij")
    r1 = np.log2(1.0 + p1 * gains[0, 0] / (1.0 + p2 * gains[0, 1]))
    r2 = np.log2(1.0 + p2 * gains[1, 1] / (1.0 + p1 * gains[1, 0]))
    worst = np.minimum(r1, r2)
    a, b = np.unravel_index(np.argmax(worst), worst.shape)
    return float(worst[a, b]), (float(p[a]), float(p[b]))


def extract_precoders(Vtilde: Sequence[np.ndarray], nS: int) -> List[np.ndarray]:
    """
    Rank-``nS`` precoders from relaxed covariances.

    ``V = U[:, :nS] diag(sqrt(lambda[:nS]))`` with eigenvalues sorted in
    decreasing order; each eigenvector is rotated so that its largest entry
    is real and positive. Columns beyond the covariance dimension are zero.
    """
    result = []
    for Vt in Vtilde:
        dim = Vt.shape[0]
        eigvals, eigvecs = scipy.linalg.eigh(_hermitian(Vt))
        order = np.argsort(eigvals)[::-1][: min(nS, dim)]
        lam = np.clip(eigvals[order], 0.0, None)
        U = eigvecs[:, order].astype(complex)
        for j in range(U.shape[1]):
            pivot = U[np.argmax(np.abs(U[:, j])), j]
            if abs(pivot) > 0:
                U[:, j] *= abs(pivot) / pivot
        V = np.zeros((dim, nS), dtype=complex)
        V[:, : len(order)] = U * np.sqrt(lam)[None, :]
        result.append(V)
    return result


class MinRateProblem:
    """Rates, gradients and CCCP surrogates over serving-block covariances.

    Args:
        ch: Channel realization
        serving: Serving ENs of every UE (1-based), indexed by ``k - 1``
        power: Per-EN power budget on a linear scale
    """

    def __init__(
        self, ch: ChannelRealization, serving: Sequence[Sequence[int]], power: float
    ):
        self.N = ch.N
        self.nT = ch.nT
        self.nR = ch.nR
        self.power = float(power)
        if len(serving) != self.N:
            raise ParameterError(f"{len(serving)} serving sets for {self.N} UEs")
        self.serving: Tuple[Tuple[int, ...], ...] = tuple(
            tuple(int(i) for i in s) for s in serving
        )
        for ens in self.serving:
            if not ens or len(set(ens)) != len(ens):
                raise ParameterError(f"invalid serving set {ens}")
            if min(ens) < 1 or max(ens) > self.N:
                raise ParameterError(f"serving set {ens} outside [1, {self.N}]")

        # Rows of the stacked N*nT antenna vector covered by each UE's block
        self.rows = [
            np.concatenate([np.arange((i - 1) * self.nT, i * self.nT) for i in ens])
            for ens in self.serving
        ]
        # A[k][l]: channel from UE l's serving block to UE k
        stacked = [ch.stacked(k) for k in range(1, self.N + 1)]
        self.A = [
            [stacked[k][:, self.rows[l]] for l in range(self.N)] for k in range(self.N)
        ]
        self.eye = np.eye(self.nR, dtype=complex)

    def block_size(self, l: int) -> int:
        """Dimension of the covariance of UE ``l`` (0-based)."""
        return len(self.rows[l])

    def _received(self, Vt: Sequence[np.ndarray]) -> List[List[np.ndarray]]:
        return [
            [self.A[k][l] @ Vt[l] @ self.A[k][l].conj().T for l in range(self.N)]
            for k in range(self.N)
        ]

    def f1(self, k: int, Vt: Sequence[np.ndarray]) -> float:
        """Log-det of the total received covariance at UE ``k`` (0-based)."""
        total = self.eye + sum(
            self.A[k][l] @ Vt[l] @ self.A[k][l].conj().T for l in range(self.N)
        )
        return log2det(total)

    def f2(self, k: int, Vt: Sequence[np.ndarray]) -> float:
        """Log-det of the interference-plus-noise covariance at UE ``k``."""
        total = self.eye + sum(
            self.A[k][l] @ Vt[l] @ self.A[k][l].conj().T
            for l in range(self.N)
            if l != k
        )
        return log2det(total)

    def rates(self, Vt: Sequence[np.ndarray]) -> np.ndarray:
        """``g_k`` for every UE."""
        received = self._received(Vt)
        out = np.empty(self.N)
        for k in range(self.N):
            interference = self.eye + sum(
                r for l, r in enumerate(received[k]) if l != k
            )
            out[k] = log2det(interference + received[k][k]) - log2det(interference)
        return out

    def _grad_logdet(self, k: int, T: np.ndarray) -> List[np.ndarray]:
        chol = (_cholesky(T), True)
        return [
            _hermitian(
                self.A[k][l].conj().T @ scipy.linalg.cho_solve(chol, self.A[k][l])
            )
            / LN2
            for l in range(self.N)
        ]

    def grad_f1(self, k: int, Vt: Sequence[np.ndarray]) -> List[np.ndarray]:
        """Gradient of ``f1_k`` with respect to every ``V~_l``."""
        T = self.eye + sum(
            self.A[k][l] @ Vt[l] @ self.A[k][l].conj().T for l in range(self.N)
        )
        return self._grad_logdet(k, T)

    def grad_f2(self, k: int, Vt: Sequence[np.ndarray]) -> List[np.ndarray]:
        """Gradient of ``f2_k``; the entry for ``l == k`` is zero."""
        T = self.eye + sum(
            self.A[k][l] @ Vt[l] @ self.A[k][l].conj().T
            for l in range(self.N)
            if l != k
        )
        grads = self._grad_logdet(k, T)
        grads[k] = np.zeros_like(grads[k])
        return grads

    def surrogate(self, Vt: Sequence[np.ndarray]) -> "Surrogate":
        """Concave lower bound of every ``g_k``, tight at ``Vt``."""
        return Surrogate(self, Vt)

    def en_powers_from_factors(self, factors: Sequence[np.ndarray]) -> np.ndarray:
        """Power of every EN for covariances ``G G^H``."""
        powers = np.zeros(self.N)
        for l, G in enumerate(factors):
            row_power = np.sum(np.abs(G) ** 2, axis=1).reshape(-1, self.nT).sum(axis=1)
            for j, i in enumerate(self.serving[l]):
                powers[i - 1] += row_power[j]
        return powers

    def project_power(self, factors: Sequence[np.ndarray]) -> List[np.ndarray]:
        """Scale the rows of overloaded ENs down to the power budget."""
        powers = self.en_powers_from_factors(factors)
        scale = np.ones(self.N)
        over = powers > self.power
        scale[over] = np.sqrt(self.power / powers[over])
        projected = []
        for l, G in enumerate(factors):
            row_scale = np.repeat(scale[np.array(self.serving[l]) - 1], self.nT)
            projected.append(G * row_scale[:, None])
        return projected

    def initial_factors(self, seed_scale: float) -> List[np.ndarray]:
        """Diagonal start where every EN spends ``seed_scale * P``."""
        load = np.zeros(self.N)
        for ens in self.serving:
            for i in ens:
                load[i - 1] += 1
        factors = []
        for ens in self.serving:
            diag = np.repeat(
                [seed_scale * self.power / (self.nT * load[i - 1]) for i in ens],
                self.nT,
            )
            factors.append(np.diag(np.sqrt(diag)).astype(complex))
        return factors


def covariances(factors: Sequence[np.ndarray]) -> List[np.ndarray]:
    """``G G^H`` for every factor."""
    return [G @ G.conj().T for G in factors]


class Surrogate:
    """CCCP surrogates ``g^_k`` linearized at a fixed point."""

    def __init__(self, problem: MinRateProblem, Vt_lin: Sequence[np.ndarray]):
        self.problem = problem
        self.Vt_lin = [np.array(V) for V in Vt_lin]
        self.f2_lin = np.array([problem.f2(k, Vt_lin) for k in range(problem.N)])
        self.W = [problem.grad_f2(k, Vt_lin) for k in range(problem.N)]

    def values(self, Vt: Sequence[np.ndarray]) -> np.ndarray:
        """``g^_k(Vt)`` for every UE."""
        p = self.problem
        out = np.empty(p.N)
        for k in range(p.N):
            linear = sum(
                np.real(np.trace(self.W[k][l] @ (Vt[l] - self.Vt_lin[l])))
                for l in range(p.N)
                if l != k
            )
            out[k] = p.f1(k, Vt) - self.f2_lin[k] - linear
        return out

    def gradients(
        self, Vt: Sequence[np.ndarray], weights: np.ndarray
    ) -> List[np.ndarray]:
        """Gradient of ``sum_k weights[k] * g^_k`` with respect to every ``V~_l``."""
        p = self.problem
        total = [np.zeros_like(V, dtype=complex) for V in Vt]
        for k in range(p.N):
            if weights[k] == 0:
                continue
            g1 = p.grad_f1(k, Vt)
            for l in range(p.N):
                total[l] += weights[k] * (g1[l] - self.W[k][l])
        return total


def softmin(values: np.ndarray, temperature: float) -> Tuple[float, np.ndarray]:
    """Smooth minimum ``-t log sum exp(-v/t)`` and its weights."""
    low = float(np.min(values))
    w = np.exp(-(values - low) / temperature)
    total = float(np.sum(w))
    return low - temperature * np.log(total), w / total


@dataclass
class InnerResult:
    factors: List[np.ndarray]
    min_value: float
    iterations: int


def _inner_ascent(
    problem: MinRateProblem,
    surrogate: Surrogate,
    factors: List[np.ndarray],
    params: SolverParams,
) -> InnerResult:
    """
    Raise ``min_k g^_k`` starting from ``factors``.

    Ascent on the softmin of the surrogates for each temperature of the
    schedule. Every UE's factor moves along its own normalized gradient
    block and overloaded ENs are scaled back after each step. The returned
    point is the best visited one, so it is never worse than the start.
    """
    Vt = covariances(factors)
    vals = surrogate.values(Vt)
    best = InnerResult(list(factors), float(vals.min()), 0)
    iterations = 0

    for temperature in params.softmin_temperature_schedule:
        obj, weights = softmin(vals, temperature)
        step = params.initial_step
        for _ in range(params.inner_max_iters):
            grads = surrogate.gradients(Vt, weights)
            directions = []
            for G, grad in zip(factors, grads):
                D = 2.0 * grad @ G
                norm = np.linalg.norm(D)
                scale = np.linalg.norm(G) / norm if norm > 0 else 0.0
                directions.append(D * scale)

            accepted = False
            t = step
            for _ in range(params.max_backtracks):
                candidate = problem.project_power(
                    [G + t * D for G, D in zip(factors, directions)]
                )
                cand_Vt = covariances(candidate)
                cand_vals = surrogate.values(cand_Vt)
                cand_obj, cand_weights = softmin(cand_vals, temperature)
                if cand_obj > obj:
                    accepted = True
                    break
                t *= params.step_backtrack
            if not accepted:
                break

            iterations += 1
            gain = cand_obj - obj
            factors, Vt, vals, obj, weights = (
                candidate,
                cand_Vt,
                cand_vals,
                cand_obj,
                cand_weights,
            )
            if vals.min() >= best.min_value:
                best = InnerResult(list(factors), float(vals.min()), iterations)
            step = min(t / params.step_backtrack, 2.0)
            if gain <= params.inner_tol * max(1.0, abs(obj)):
                break

    best.iterations = iterations
    return best


@dataclass
class MinRateSolution:
    """Result of :func:`maximize_min_rate`."""

    precoders: PrecoderSet
    rates: np.ndarray
    R_min: float
    relaxed_rates: np.ndarray
    history: List[float] = field(default_factory=list)
    outer_iterations: int = 0
    converged: bool = False
    stalled: bool = False


def embed(problem: MinRateProblem, blocks: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Place serving-block precoders into the full ``N*nT`` antenna space."""
    full = []
    for l, B in enumerate(blocks):
        V = np.zeros((problem.N * problem.nT, B.shape[1]), dtype=complex)
        V[problem.rows[l]] = B
        full.append(V)
    return full


def maximize_min_rate(
    ch: ChannelRealization,
    serving: Sequence[Sequence[int]],
    cfg: SystemConfig,
    params: Optional[SolverParams] = None,
) -> MinRateSolution:
    """
    Max-min rate precoding under per-EN power and connectivity constraints.

    Runs CCCP outer iterations until the relative min-rate gain drops below
    ``outer_tol`` or ``max_outer_iters`` is reached, then extracts rank-nS
    precoders. Reported rates come from the extracted precoders.

    Raises:
        ParameterError: If channel and configuration dimensions disagree
    """
    params = params or cfg.solver
    if (ch.N, ch.nR, ch.nT) != (cfg.N, cfg.nR, cfg.nT):
        raise ParameterError(
            f"channel dimensions {(ch.N, ch.nR, ch.nT)} do not match "
            f"configuration {(cfg.N, cfg.nR, cfg.nT)}"
        )

    problem = MinRateProblem(ch, serving, cfg.power_linear)
    factors = problem.initial_factors(params.seed_scale)
    Vt = covariances(factors)
    history = [float(problem.rates(Vt).min())]
    converged = False
    stalled = False
    outer = 0

    for outer in range(1, params.max_outer_iters + 1):
        try:
            surrogate = problem.surrogate(Vt)
            inner = _inner_ascent(problem, surrogate, factors, params)
            new_Vt = covariances(inner.factors)
            new_min = float(problem.rates(new_Vt).min())
        except NumericDomainError as e:
            logger.warning(f"Inner step failed at outer iteration {outer}: {e}")
            stalled = True
            break

        if new_min < history[-1] - params.inner_tol - 1e-9:
            logger.warning(
                f"Min rate decreased from {history[-1]:.9g} to {new_min:.9g}; "
                "keeping previous iterate"
            )
            stalled = True
            break

        gain = (new_min - history[-1]) / max(abs(history[-1]), 1e-12)
        factors, Vt = inner.factors, new_Vt
        history.append(new_min)
        logger.debug(
            f"CCCP iteration {outer}: min rate {new_min:.6f} "
            f"({inner.iterations} inner steps)"
        )
        if gain < params.outer_tol:
            converged = True
            break

    blocks = extract_precoders(Vt, cfg.n_streams)
    precoders = PrecoderSet(
        V=tuple(embed(problem, blocks)),
        support=problem.serving,
        Vtilde=tuple(Vt),
        nT=cfg.nT,
    )
    rates = np.array([user_rate(k, precoders, ch) for k in range(1, cfg.N + 1)])
    return MinRateSolution(
        precoders=precoders,
        rates=rates,
        R_min=float(rates.min()),
        relaxed_rates=problem.rates(Vt),
        history=history,
        outer_iterations=outer,
        converged=converged,
        stalled=stalled,
    )
