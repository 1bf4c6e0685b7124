"""
Configuration and statistics dataclasses for the F-RAN latency simulator.
"""

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

from errors import ParameterError

STRATEGIES: Tuple[str, ...] = ("unicast", "multicast", "coded")
SWEEP_AXES: Tuple[str, ...] = ("mu", "M", "L", "P_dB", "C")

# Floor guard so that e.g. mu = 1/3 and L = 60 caches 20 fragments.
FRAGMENT_EPS = 1e-9


def _require(condition: bool, key: str, message: str) -> None:
    if not condition:
        raise ParameterError(f"{key} {message}", key=key)


def effective_capacity(c_transport: float, c_fronthaul: float) -> float:
    """Capacity of a core-cloud -> edge-cloud -> ENs chain.

    The edge cloud only forwards what it receives, so the chain behaves as a
    single multicast link limited by its weaker hop.
    """
    return min(c_transport, c_fronthaul)


@dataclass(frozen=True)
class SolverParams:
    """Settings of the CCCP max-min rate optimizer."""

    max_outer_iters: int = 20
    outer_tol: float = 1e-4
    inner_max_iters: int = 40
    inner_tol: float = 1e-7
    softmin_temperature_schedule: Tuple[float, ...] = (0.5, 0.1, 0.02)
    step_backtrack: float = 0.5
    seed_scale: float = 0.5
    initial_step: float = 0.5
    max_backtracks: int = 20

    def __post_init__(self):
        """Validate solver settings after initialization."""
        _require(self.max_outer_iters >= 1, "max_outer_iters", "must be >= 1")
        _require(self.inner_max_iters >= 1, "inner_max_iters", "must be >= 1")
        _require(self.outer_tol > 0, "outer_tol", "must be positive")
        _require(self.inner_tol > 0, "inner_tol", "must be positive")
        schedule = tuple(float(t) for t in self.softmin_temperature_schedule)
        object.__setattr__(self, "softmin_temperature_schedule", schedule)
        _require(
            len(schedule) > 0 and all(t > 0 for t in schedule),
            "softmin_temperatures",
            "must be a non-empty list of positive values",
        )
        _require(
            all(a > b for a, b in zip(schedule, schedule[1:])),
            "softmin_temperatures",
            "must be strictly decreasing",
        )
        _require(
            0 < self.step_backtrack < 1, "step_backtrack", "must be in (0, 1)"
        )
        _require(0 < self.seed_scale <= 1, "seed_scale", "must be in (0, 1]")
        _require(self.initial_step > 0, "initial_step", "must be positive")
        _require(self.max_backtracks >= 1, "max_backtracks", "must be >= 1")


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of one F-RAN scenario.

    Sizes are in bits, capacities in bits/symbol and the per-EN power is
    given in dB (the SNR of the edge link).
    """

    # Network
    N: int = 4
    M: int = 2
    nT: int = 1
    nR: int = 1
    nS: Optional[int] = None

    # Library and caches
    F: int = 60
    L: int = 50
    S: float = 8e8
    mu: float = 0.3
    mu_per_en: Optional[Tuple[float, ...]] = None
    gamma: float = 0.2

    # Links
    C: float = 2.0
    P_dB: float = 20.0
    alpha: float = 0.7

    solver: SolverParams = field(default_factory=SolverParams)

    def __post_init__(self):
        """Validate configuration after initialization."""
        _require(self.N >= 1, "N", "must be a positive integer")
        _require(self.F >= 1, "F", "must be a positive integer")
        _require(self.L >= 1, "L", "must be a positive integer")
        _require(
            self.S > 0 and math.isfinite(self.S), "S", "must be positive and finite"
        )
        _require(0.0 <= self.mu <= 1.0, "mu", f"must be in [0, 1], got {self.mu}")
        _require(1 <= self.M <= self.N, "M", f"must be in [1, N={self.N}]")
        _require(self.C >= 0, "C", "must be non-negative")
        _require(math.isfinite(self.P_dB), "P_dB", "must be finite")
        _require(self.gamma >= 0, "gamma", "must be non-negative")
        _require(0 < self.alpha < 1, "alpha", "must be in (0, 1)")
        _require(self.nT >= 1, "nT", "must be a positive integer")
        _require(self.nR >= 1, "nR", "must be a positive integer")
        if self.nS is not None:
            _require(
                1 <= self.nS <= min(self.N * self.nT, self.nR),
                "nS",
                f"must be in [1, min(N*nT, nR)={min(self.N * self.nT, self.nR)}]",
            )
        if self.mu_per_en is not None:
            values = tuple(float(m) for m in self.mu_per_en)
            object.__setattr__(self, "mu_per_en", values)
            _require(len(values) == self.N, "mu_per_en", f"needs {self.N} values")
            _require(
                all(0.0 <= m <= 1.0 for m in values),
                "mu_per_en",
                "values must be in [0, 1]",
            )

    @property
    def subfile_size(self) -> float:
        """Size S/L of one subfile in bits."""
        return self.S / self.L

    @property
    def power_linear(self) -> float:
        """Per-EN transmit power on a linear scale."""
        return 10.0 ** (self.P_dB / 10.0)

    @property
    def n_streams(self) -> int:
        """Data streams per UE; min(M*nT, nR) unless set explicitly."""
        if self.nS is not None:
            return self.nS
        return min(self.M * self.nT, self.nR)

    def fractional_capacity(self, en: int) -> float:
        """Fractional caching capacity of EN ``en`` (1-based)."""
        if self.mu_per_en is not None:
            return self.mu_per_en[en - 1]
        return self.mu

    def cached_fragments(self, en: int) -> int:
        """Number of subfiles of every file that EN ``en`` stores."""
        return int(math.floor(self.fractional_capacity(en) * self.L + FRAGMENT_EPS))

    def library_budget(self, en: int) -> float:
        """Cache size B of EN ``en`` in files."""
        return self.fractional_capacity(en) * self.F

    def as_dict(self) -> Dict[str, Any]:
        """Flat dictionary of the scenario parameters, solver settings excluded."""
        result = {f.name: getattr(self, f.name) for f in fields(self)}
        result.pop("solver")
        result["nS"] = self.n_streams
        return result


@dataclass(frozen=True)
class SweepSpec:
    """One parameter sweep: a base scenario and the values of one axis."""

    base: SystemConfig
    axis: str
    values: Tuple[float, ...]
    strategies: Tuple[str, ...] = STRATEGIES
    n_trials: int = 200
    master_seed: int = 1
    output_path: str = "results.csv"
    workers: Optional[int] = None
    curve_axis: Optional[str] = None
    curve_values: Tuple[float, ...] = ()
    assumptions: Tuple[str, ...] = ()

    def __post_init__(self):
        """Validate the sweep after initialization."""
        _require(self.axis in SWEEP_AXES, "axis", f"must be one of {SWEEP_AXES}")
        _require(len(self.values) > 0, "values", "must not be empty")
        _require(len(self.strategies) > 0, "strategies", "needs at least one entry")
        for name in self.strategies:
            _require(name in STRATEGIES, "strategies", f"unknown strategy {name!r}")
        _require(self.n_trials >= 1, "trials", "must be >= 1")
        _require(self.master_seed >= 0, "seed", "must be non-negative")
        if self.workers is not None:
            _require(self.workers >= 1, "workers", "must be >= 1")
        if self.curve_axis is not None:
            _require(
                self.curve_axis in SWEEP_AXES and self.curve_axis != self.axis,
                "curve_axis",
                f"must be one of {SWEEP_AXES} and differ from axis",
            )
            _require(len(self.curve_values) > 0, "curve_values", "must not be empty")
        for curve_value in self.curve_values or (None,):
            for value in self.values:
                self.point_config(value, curve_value)

    def point_config(
        self, value: float, curve_value: Optional[float] = None
    ) -> SystemConfig:
        """Scenario at one sweep point; raises ParameterError when invalid."""
        config = with_parameter(self.base, self.axis, value)
        if curve_value is not None and self.curve_axis is not None:
            config = with_parameter(config, self.curve_axis, curve_value)
        return config


def with_parameter(config: SystemConfig, name: str, value: float) -> SystemConfig:
    """Copy of ``config`` with one sweepable parameter replaced."""
    if name in ("M", "L"):
        if float(value) != int(value):
            raise ParameterError(f"{name} must be an integer, got {value}", key=name)
        return replace(config, **{name: int(value)})
    if name == "mu":
        return replace(config, mu=float(value), mu_per_en=None)
    if name in ("P_dB", "C"):
        return replace(config, **{name: float(value)})
    raise ParameterError(f"{name} is not a sweepable parameter", key=name)


@dataclass
class RunStats:
    """Counters collected while running experiments."""

    trials_run: int = 0
    stalled_trials: int = 0
    infinite_trials: int = 0
    points_completed: int = 0
    elapsed_seconds: float = 0.0

    def add_trial(self, stalled: bool, infinite: bool) -> None:
        """Record one finished trial."""
        self.trials_run += 1
        if stalled:
            self.stalled_trials += 1
        if infinite:
            self.infinite_trials += 1

    @property
    def stall_fraction(self) -> float:
        """Share of trials whose optimizer stalled."""
        if self.trials_run == 0:
            return 0.0
        return self.stalled_trials / self.trials_run

    def get_summary(self) -> Dict[str, Any]:
        """Get a summary dictionary of the statistics."""
        return {
            "trials_run": self.trials_run,
            "stalled_trials": self.stalled_trials,
            "infinite_trials": self.infinite_trials,
            "points_completed": self.points_completed,
            "elapsed_seconds": self.elapsed_seconds,
        }

    def __str__(self) -> str:
        """String representation of run statistics."""
        summary = self.get_summary()
        return (
            f"Run Summary:\n"
            f"  Sweep points: {summary['points_completed']}\n"
            f"  Trials: {summary['trials_run']}\n"
            f"  Solver stalls: {summary['stalled_trials']}\n"
            f"  Infinite-latency trials: {summary['infinite_trials']}\n"
            f"  Total time: {summary['elapsed_seconds']:.2f}s"
        )
