#!/usr/bin/env python3
"""
Command-line front end of the F-RAN latency simulator.

Reads a flat ``key = value`` configuration file (or a bundled preset),
applies command-line overrides, sweeps one parameter and writes the mean
latencies with 95% confidence half-widths to a CSV file plus a key-value
run manifest next to it.
"""

import argparse
import csv
import logging
import math
import sys
from dataclasses import asdict, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

from config import (
    STRATEGIES,
    SWEEP_AXES,
    RunStats,
    SolverParams,
    SweepSpec,
    SystemConfig,
    effective_capacity,
)
from errors import ConfigError, ParameterError
from simulator import AggregateResult, run_experiment

__version__ = "1.0.0"

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).resolve().parent / "presets"
PRESETS = ("fig3", "fig4", "fig5", "fig6")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_STALL = 4

# Share of stalled trials above which the run is reported as failed
STALL_LIMIT = 0.05

CSV_HEADER = (
    "strategy",
    "axis_name",
    "axis_value",
    "N",
    "F",
    "L",
    "S_bits",
    "mu",
    "M",
    "C",
    "P_dB",
    "gamma",
    "alpha",
    "nT",
    "nR",
    "nS",
    "n_trials",
    "seed",
    "TF_mean",
    "TF_ci95",
    "TE_mean",
    "TE_ci95",
    "Ttotal_mean",
    "Ttotal_ci95",
    "inf_trials",
)

SYSTEM_KEYS = (
    "N",
    "F",
    "L",
    "S",
    "mu",
    "mu_per_en",
    "M",
    "C",
    "P_dB",
    "gamma",
    "alpha",
    "nT",
    "nR",
    "nS",
)
CAPACITY_KEYS = ("C", "C_transport", "C_fronthaul")
SOLVER_KEYS = {
    "max_outer_iters": "max_outer_iters",
    "outer_tol": "outer_tol",
    "inner_max_iters": "inner_max_iters",
    "inner_tol": "inner_tol",
    "softmin_temperatures": "softmin_temperature_schedule",
    "step_backtrack": "step_backtrack",
    "seed_scale": "seed_scale",
    "initial_step": "initial_step",
    "max_backtracks": "max_backtracks",
}
SWEEP_KEYS = {
    "axis": "axis",
    "values": "values",
    "strategies": "strategies",
    "trials": "n_trials",
    "seed": "master_seed",
    "output": "output_path",
    "workers": "workers",
    "curve_axis": "curve_axis",
    "curve_values": "curve_values",
    "assumptions": "assumptions",
}


def _parse_int(key: str, text: str) -> int:
    try:
        value = _parse_real(key, text)
    except ConfigError:
        raise ConfigError(f"expected an integer, got {text!r}", key=key)
    if not value.is_integer():
        raise ConfigError(f"expected an integer, got {text!r}", key=key)
    return int(value)


def _parse_real(key: str, text: str) -> float:
    """Parse a real number; fractions such as ``1/3`` are accepted."""
    try:
        if "/" in text:
            return float(Fraction(text.replace(" ", "")))
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"expected a number, got {text!r}", key=key)


def _split(text: str, sep: str = ",") -> List[str]:
    return [item.strip() for item in text.split(sep) if item.strip()]


def _real_list(key: str, text: str) -> tuple:
    return tuple(_parse_real(key, item) for item in _split(text))


def _int_or_auto(key: str, text: str) -> Optional[int]:
    if text.lower() == "auto":
        return None
    return _parse_int(key, text)


# Parser for every recognized key
_CONVERTERS: Dict[str, Callable[[str, str], Any]] = {
    "N": _parse_int,
    "F": _parse_int,
    "L": _parse_int,
    "M": _parse_int,
    "nT": _parse_int,
    "nR": _parse_int,
    "nS": _int_or_auto,
    "S": _parse_real,
    "mu": _parse_real,
    "C": _parse_real,
    "C_transport": _parse_real,
    "C_fronthaul": _parse_real,
    "P_dB": _parse_real,
    "gamma": _parse_real,
    "alpha": _parse_real,
    "mu_per_en": _real_list,
    "max_outer_iters": _parse_int,
    "outer_tol": _parse_real,
    "inner_max_iters": _parse_int,
    "inner_tol": _parse_real,
    "softmin_temperatures": _real_list,
    "step_backtrack": _parse_real,
    "seed_scale": _parse_real,
    "initial_step": _parse_real,
    "max_backtracks": _parse_int,
    "axis": lambda key, text: text,
    "values": _real_list,
    "strategies": lambda key, text: tuple(_split(text)),
    "trials": _parse_int,
    "seed": _parse_int,
    "output": lambda key, text: text,
    "workers": _parse_int,
    "curve_axis": lambda key, text: text,
    "curve_values": _real_list,
    "assumptions": lambda key, text: tuple(_split(text, ";")),
}


def read_key_values(text: str, source: str = "<config>") -> Dict[str, str]:
    """
    Parse ``key = value`` lines into raw strings.

    Blank lines and ``#`` comments are skipped; a repeated key keeps its
    last value.

    Raises:
        ConfigError: On a line without ``=`` or an unknown key
    """
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"{source}:{lineno}: expected 'key = value', got {line!r}"
            )
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONVERTERS:
            raise ConfigError(f"unknown key in {source}:{lineno}", key=key)
        raw[key] = value
    return raw


def preset_path(name: str) -> Path:
    """Location of a bundled preset file."""
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}, choose from {PRESETS}", key="preset"
        )
    return PRESET_DIR / f"{name}.cfg"


def build_spec(raw: Mapping[str, str]) -> SweepSpec:
    """
    Convert raw key-value strings into a validated sweep.

    ``C_transport`` and ``C_fronthaul`` describe a two-hop cloud chain and
    replace ``C`` by the capacity of the weaker hop.

    Raises:
        ConfigError: Naming the offending key
    """
    values = {key: _CONVERTERS[key](key, text) for key, text in raw.items()}

    for key in ("axis", "values"):
        if key not in values:
            raise ConfigError("is required", key=key)

    system = {key: values[key] for key in SYSTEM_KEYS if key in values}
    hops = [key for key in CAPACITY_KEYS[1:] if key in values]
    if hops:
        if len(hops) == 1:
            raise ConfigError("needs both C_transport and C_fronthaul", key=hops[0])
        if "C" in values:
            raise ConfigError(
                "cannot be combined with C_transport/C_fronthaul", key="C"
            )
        system["C"] = effective_capacity(values["C_transport"], values["C_fronthaul"])

    solver = {SOLVER_KEYS[k]: values[k] for k in SOLVER_KEYS if k in values}
    sweep = {SWEEP_KEYS[k]: values[k] for k in SWEEP_KEYS if k in values}

    try:
        base = SystemConfig(**system, solver=SolverParams(**solver))
        return SweepSpec(base=base, **sweep)
    except ParameterError as e:
        raise ConfigError(str(e), key=e.key) from e


def parse_config(
    path: Optional[str], overrides: Optional[Mapping[str, str]] = None
) -> SweepSpec:
    """
    Load a configuration file and apply command-line overrides.

    Args:
        path: Configuration file, or None to start from an empty file
        overrides: Raw ``key -> value`` strings that replace file entries

    Returns:
        Validated sweep

    Raises:
        ConfigError: Missing file, unknown key or invalid value

    Examples:
        >>> spec = parse_config("presets/fig3.cfg", {"M": "3"})
        >>> spec.base.M
        3
    """
    raw: Dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ConfigError(f"configuration file not found: {path}", key="config")
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e}", key="config")
        raw.update(read_key_values(text, source=str(path)))

    for key, value in (overrides or {}).items():
        if key not in _CONVERTERS:
            raise ConfigError("unknown override", key=key)
        raw[key] = str(value)

    return build_spec(raw)


def format_number(value: float) -> str:
    """Nine significant digits; infinities as ``inf``."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.9g}"


def result_rows(
    spec: SweepSpec, axis_value: float, result: AggregateResult
) -> List[Dict[str, str]]:
    """CSV rows of one sweep point, one per requested strategy."""
    cfg = result.config
    rows = []
    for name in spec.strategies:
        summary = result.strategies[name]
        rows.append(
            {
                "strategy": name,
                "axis_name": spec.axis,
                "axis_value": format_number(axis_value),
                "N": str(cfg.N),
                "F": str(cfg.F),
                "L": str(cfg.L),
                "S_bits": format_number(cfg.S),
                "mu": format_number(cfg.mu),
                "M": str(cfg.M),
                "C": format_number(cfg.C),
                "P_dB": format_number(cfg.P_dB),
                "gamma": format_number(cfg.gamma),
                "alpha": format_number(cfg.alpha),
                "nT": str(cfg.nT),
                "nR": str(cfg.nR),
                "nS": str(cfg.n_streams),
                "n_trials": str(result.n_trials),
                "seed": str(result.master_seed),
                "TF_mean": format_number(summary.TF_mean),
                "TF_ci95": format_number(summary.TF_ci95),
                "TE_mean": format_number(summary.TE_mean),
                "TE_ci95": format_number(summary.TE_ci95),
                "Ttotal_mean": format_number(summary.Ttotal_mean),
                "Ttotal_ci95": format_number(summary.Ttotal_ci95),
                "inf_trials": str(summary.inf_trials),
            }
        )
    return rows


def best_axis_value(rows: Sequence[Mapping[str, str]], strategy: str) -> float:
    """
    Axis value with the smallest mean total latency for ``strategy``.

    Ties go to the smaller axis value.

    Raises:
        ValueError: If no row belongs to ``strategy``
    """
    candidates = [
        (float(row["Ttotal_mean"]), float(row["axis_value"]))
        for row in rows
        if row["strategy"] == strategy
    ]
    if not candidates:
        raise ValueError(f"no rows for strategy {strategy!r}")
    return min(candidates)[1]


def _curve_label(spec: SweepSpec, curve_value: Optional[float]) -> str:
    if curve_value is None or spec.curve_axis is None:
        return ""
    return f"{spec.curve_axis}={format_number(curve_value)}"


def _manifest_value(value: Any) -> str:
    if isinstance(value, (tuple, list)):
        return ", ".join(_manifest_value(v) for v in value)
    if isinstance(value, float):
        return format_number(value)
    return str(value)


def write_manifest(
    path: Path,
    spec: SweepSpec,
    gains: Mapping[str, float],
    best: Mapping[str, float],
) -> None:
    """Write the key-value run manifest that accompanies a CSV file."""
    lines = [
        "# F-RAN latency simulator run manifest",
        f"version = {__version__}",
        f"seed = {spec.master_seed}",
        f"trials = {spec.n_trials}",
        f"axis = {spec.axis}",
        f"values = {_manifest_value(spec.values)}",
        f"strategies = {_manifest_value(spec.strategies)}",
    ]
    if spec.curve_axis is not None:
        lines.append(f"curve_axis = {spec.curve_axis}")
        lines.append(f"curve_values = {_manifest_value(spec.curve_values)}")
    for key, value in spec.base.as_dict().items():
        if value is not None:
            lines.append(f"{key} = {_manifest_value(value)}")
    for f in fields(SolverParams):
        value = getattr(spec.base.solver, f.name)
        lines.append(f"{f.name} = {_manifest_value(value)}")
    if spec.assumptions:
        lines.append(f"assumptions = {'; '.join(spec.assumptions)}")
    for label, gain in gains.items():
        lines.append(f"coded_gain[{label}] = {format_number(gain)}")
    for label, value in best.items():
        lines.append(f"best_axis_value[{label}] = {format_number(value)}")

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def manifest_path(output_path: str) -> Path:
    return Path(f"{output_path}.manifest")


def run_sweep(
    spec: SweepSpec, stats: Optional[RunStats] = None
) -> List[Dict[str, str]]:
    """
    Run every sweep point and write the CSV and manifest files.

    Rows are ordered by curve value, then axis value, then strategy. The
    output files are opened before any trial runs.

    Args:
        spec: Sweep to run
        stats: Optional counters updated while running

    Returns:
        The CSV data rows as dictionaries keyed by column name

    Raises:
        OSError: If the output files cannot be written
    """
    stats = stats if stats is not None else RunStats()
    out_path = Path(spec.output_path)
    curves: Sequence[Optional[float]] = spec.curve_values or (None,)
    total_points = len(curves) * len(spec.values)

    rows: List[Dict[str, str]] = []
    gains: Dict[str, float] = {}
    best: Dict[str, float] = {}

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        manifest_path(spec.output_path).touch()
        writer = csv.DictWriter(fh, fieldnames=CSV_HEADER, lineterminator="\n")
        writer.writeheader()

        for curve_value in curves:
            curve = _curve_label(spec, curve_value)
            curve_rows: List[Dict[str, str]] = []
            for value in spec.values:
                cfg = spec.point_config(value, curve_value)
                result = run_experiment(
                    cfg,
                    spec.n_trials,
                    spec.master_seed,
                    workers=spec.workers,
                    stats=stats,
                )
                stats.points_completed += 1

                point = f"{spec.axis}={format_number(value)}"
                label = f"{curve}, {point}" if curve else point
                gains[label] = result.coded_gain()
                logger.info(
                    f"[{stats.points_completed}/{total_points}] {label}: "
                    f"coded gain {gains[label]:.3f}, "
                    f"stalled trials {result.stalled_trials}"
                )

                point_rows = result_rows(spec, value, result)
                writer.writerows(point_rows)
                curve_rows.extend(point_rows)

            for name in spec.strategies:
                key = f"{name}, {curve}" if curve else name
                best[key] = best_axis_value(curve_rows, name)
                logger.info(f"Best {spec.axis} for {key}: {format_number(best[key])}")
            rows.extend(curve_rows)

    write_manifest(manifest_path(spec.output_path), spec, gains, best)
    logger.info(f"Wrote {len(rows)} rows to {out_path}")
    return rows


def log_banner(spec: SweepSpec) -> None:
    """Log every resolved setting so a run can be reproduced from its log."""
    logger.info(f"F-RAN latency simulator {__version__}")
    logger.info("=" * 50)
    settings: Dict[str, Any] = dict(spec.base.as_dict())
    settings.update(asdict(spec.base.solver))
    settings["axis"] = spec.axis
    settings["values"] = spec.values
    if spec.curve_axis is not None:
        settings["curve_axis"] = spec.curve_axis
        settings["curve_values"] = spec.curve_values
    settings["strategies"] = spec.strategies
    settings["trials"] = spec.n_trials
    settings["seed"] = spec.master_seed
    settings["workers"] = spec.workers or "auto"
    settings["output"] = spec.output_path
    for key, value in settings.items():
        logger.info(f"  {key:<22} {_manifest_value(value)}")
    for note in spec.assumptions:
        logger.warning(f"Assumed: {note}")
    logger.info("=" * 50)


def setup_logging(level: int = logging.INFO) -> None:
    """Setup logging configuration.

    Args:
        level: Logging level to use
    """
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


# Command-line flags that map onto configuration keys
_OVERRIDE_FLAGS = (
    "N",
    "F",
    "L",
    "S",
    "mu",
    "M",
    "C",
    "P_dB",
    "gamma",
    "alpha",
    "nT",
    "nR",
    "nS",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Monte Carlo delivery latency of an F-RAN with edge caching "
        "and coded multicast fronthaul",
    )
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", help="Key-value configuration file")
    source.add_argument("--preset", choices=PRESETS, help="Bundled sweep preset")
    parser.add_argument("--axis", choices=SWEEP_AXES, help="Parameter to sweep")
    parser.add_argument("--values", help="Comma-separated axis values")
    parser.add_argument(
        "--strategies", help=f"Comma-separated subset of {', '.join(STRATEGIES)}"
    )
    parser.add_argument("--trials", help="Monte Carlo trials per sweep point")
    parser.add_argument("--seed", help="Master random seed")
    parser.add_argument("--out", dest="output", help="Output CSV path")
    parser.add_argument("--workers", help="Worker threads (1 runs sequentially)")
    for name in _OVERRIDE_FLAGS:
        parser.add_argument(f"--{name}", metavar="VALUE", help=f"Override {name}")
    parser.add_argument("--verbose", action="store_true", help="Show debug output")
    parser.add_argument(
        "--quiet", action="store_true", help="Only show warnings and errors"
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, str]:
    """Configuration keys set on the command line."""
    keys = ("axis", "values", "strategies", "trials", "seed", "output", "workers")
    return {
        key: getattr(args, key)
        for key in keys + _OVERRIDE_FLAGS
        if getattr(args, key) is not None
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the simulator."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.verbose and args.quiet:
        parser.error("--verbose and --quiet cannot be used together")

    log_level = (
        logging.DEBUG
        if args.verbose
        else logging.WARNING if args.quiet else logging.INFO
    )
    setup_logging(log_level)

    try:
        path = str(preset_path(args.preset)) if args.preset else args.config
        spec = parse_config(path, collect_overrides(args))
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG

    log_banner(spec)

    stats = RunStats()
    try:
        run_sweep(spec, stats)
    except OSError as e:
        logger.error(f"Cannot write results: {e}")
        return EXIT_IO

    logger.info(str(stats))

    if stats.stall_fraction > STALL_LIMIT:
        logger.error(
            f"Solver stalled in {100 * stats.stall_fraction:.1f}% of trials "
            f"(limit {100 * STALL_LIMIT:.0f}%)"
        )
        return EXIT_STALL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
