"""Experiment configuration: a flat key = value file with dotted sections.

Lines are `dotted.key = value`; blank lines and # comments are ignored.
Values are parsed as booleans, integers, floats, bracketed lists of
numbers, or bare strings.  Unknown keys are hard errors so typos cannot
silently change an experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from .exponents import ModelParams
from .field import (
    FromFile,
    Gaussian,
    GridSpec,
    InitialDataSpec,
    PlaneWave,
    QuadraticPhaseGaussian,
)
from .solver import SolverConfig


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class ExperimentKind(Enum):
    SINGLE = "single"
    SWEEP = "sweep"
    ACCEPTANCE_SUITE = "accept"
    PCT_CHECK = "pct-check"
    LINEAR_CONFINEMENT = "linear-confinement"


@dataclass(frozen=True)
class ProbeConfig:
    median_radius: bool = True
    weighted_l2: bool = True
    localized_mass: bool = False
    scatter: bool = False
    checkpoint_every: int = 0
    lambdas: tuple = ()


@dataclass(frozen=True)
class SweepSpec:
    axes: dict  # name -> list of values; axes over alpha, kappa_im, amplitude, M, dt
    cap: int = 512

    _AXES = ("alpha", "kappa_im", "amplitude", "points", "dt")

    def __post_init__(self):
        if not self.axes:
            raise ConfigError("sweep requires at least one non-empty axis")
        for name, vals in self.axes.items():
            if name not in self._AXES:
                raise ConfigError(f"unknown sweep axis {name!r}; allowed: {self._AXES}")
            if not vals:
                raise ConfigError(f"sweep axis {name!r} is empty")
        total = math.prod(len(v) for v in self.axes.values())
        if total > self.cap:
            raise ConfigError(f"sweep of {total} runs exceeds cap {self.cap}")

    def points(self) -> list:
        """Cartesian product as a list of dicts, in deterministic order."""
        names = [a for a in self._AXES if a in self.axes]
        out = [dict()]
        for n in names:
            out = [{**d, n: v} for d in out for v in self.axes[n]]
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    kind: ExperimentKind
    model: ModelParams
    grid: GridSpec
    solver: SolverConfig
    initial: InitialDataSpec
    probes: ProbeConfig = dc_field(default_factory=ProbeConfig)
    output_dir: str = "runs/out"
    seed: int = 0
    sweep: Optional[SweepSpec] = None
    pct_t_star: float = 0.5
    confinement_times: tuple = (1.0, 2.0, 4.0, 8.0)


def _parse_value(text: str):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(v) for v in inner.split(",")]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_text(text: str) -> dict:
    """Flat dict of dotted keys -> parsed values; syntax errors carry line numbers."""
    out: dict = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {ln}: empty key")
        if key in out:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        out[key] = _parse_value(val)
    return out


_KNOWN_KEYS = {
    "kind", "output_dir", "seed",
    "model.dim", "model.alpha", "model.kappa_re", "model.kappa_im",
    "grid.box_length", "grid.points",
    "solver.dt", "solver.t_end", "solver.safety",
    "solver.blowup_linf_threshold", "solver.blowup_dt_floor",
    "solver.diagnostics_cadence", "solver.spectral_filter",
    "initial.kind", "initial.amplitude_re", "initial.amplitude_im",
    "initial.width", "initial.center", "initial.mode_index",
    "initial.chirp_sign", "initial.path",
    "probes.median_radius", "probes.weighted_l2", "probes.localized_mass",
    "probes.scatter", "probes.checkpoint_every", "probes.lambdas",
    "sweep.alpha", "sweep.kappa_im", "sweep.amplitude", "sweep.points",
    "sweep.dt", "sweep.cap",
    "pct.t_star",
    "confinement.times",
}

_DEFAULTS = {
    "kind": "single",
    "output_dir": "runs/out",
    "seed": 0,
    "model.kappa_re": 0.0,
    "model.kappa_im": 0.0,
    "solver.safety": 0.5,
    "solver.blowup_linf_threshold": 1e6,
    "solver.blowup_dt_floor": 1e-12,
    "solver.diagnostics_cadence": 1,
    "solver.spectral_filter": False,
    "initial.amplitude_re": 1.0,
    "initial.amplitude_im": 0.0,
    "initial.width": 1.0,
    "initial.center": 0.0,
    "initial.chirp_sign": 1,
    "probes.median_radius": True,
    "probes.weighted_l2": True,
    "probes.localized_mass": False,
    "probes.scatter": False,
    "probes.checkpoint_every": 0,
    "probes.lambdas": [],
    "sweep.cap": 512,
    "pct.t_star": 0.5,
    "confinement.times": [1.0, 2.0, 4.0, 8.0],
}


def _initial_from_keys(kv: dict) -> InitialDataSpec:
    kind = kv.get("initial.kind")
    if kind is None:
        raise ConfigError("missing required key 'initial.kind'")
    amp = complex(float(kv["initial.amplitude_re"]), float(kv["initial.amplitude_im"]))
    if kind == "gaussian":
        return Gaussian(amp, float(kv["initial.width"]), float(kv["initial.center"]))
    if kind == "plane_wave":
        m = kv.get("initial.mode_index")
        if m is None:
            raise ConfigError("plane_wave requires 'initial.mode_index'")
        if not isinstance(m, list):
            m = [m]
        return PlaneWave(amp, tuple(int(v) for v in m))
    if kind == "quadratic_phase_gaussian":
        return QuadraticPhaseGaussian(
            amp, float(kv["initial.width"]), int(kv["initial.chirp_sign"])
        )
    if kind == "file":
        path = kv.get("initial.path")
        if path is None:
            raise ConfigError("file initial data requires 'initial.path'")
        return FromFile(str(path))
    raise ConfigError(f"unknown initial.kind {kind!r}")


def load_config(source: Union[str, Path]) -> ExperimentConfig:
    """Parse and validate a config file (or literal text containing newlines)."""
    if isinstance(source, Path) or "\n" not in str(source):
        text = Path(source).read_text()
    else:
        text = str(source)
    kv = parse_config_text(text)
    unknown = sorted(set(kv) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    merged = {**_DEFAULTS, **kv}

    def need(key):
        if key not in merged:
            raise ConfigError(f"missing required key {key!r}")
        return merged[key]

    try:
        kind = ExperimentKind(str(need("kind")))
    except ValueError:
        raise ConfigError(
            f"unknown kind {merged['kind']!r}; allowed: "
            f"{[k.value for k in ExperimentKind]}"
        ) from None
    try:
        model = ModelParams(
            dim=int(need("model.dim")),
            alpha=float(need("model.alpha")),
            kappa=complex(float(merged["model.kappa_re"]),
                          float(merged["model.kappa_im"])),
        )
        grid = GridSpec(
            dim=int(need("model.dim")),
            box_length=float(need("grid.box_length")),
            points=int(need("grid.points")),
        )
        solver = SolverConfig(
            dt=float(need("solver.dt")),
            t_end=float(need("solver.t_end")),
            safety=float(merged["solver.safety"]),
            blowup_linf_threshold=float(merged["solver.blowup_linf_threshold"]),
            blowup_dt_floor=float(merged["solver.blowup_dt_floor"]),
            diagnostics_cadence=int(merged["solver.diagnostics_cadence"]),
            spectral_filter=bool(merged["solver.spectral_filter"]),
        )
        initial = _initial_from_keys(merged)
        probes = ProbeConfig(
            median_radius=bool(merged["probes.median_radius"]),
            weighted_l2=bool(merged["probes.weighted_l2"]),
            localized_mass=bool(merged["probes.localized_mass"]),
            scatter=bool(merged["probes.scatter"]),
            checkpoint_every=int(merged["probes.checkpoint_every"]),
            lambdas=tuple(float(v) for v in merged["probes.lambdas"]),
        )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    sweep = None
    axes = {}
    for name in SweepSpec._AXES:
        key = f"sweep.{name}"
        if key in kv:
            vals = kv[key]
            axes[name] = vals if isinstance(vals, list) else [vals]
    if axes or kind is ExperimentKind.SWEEP:
        if not axes:
            raise ConfigError("kind = sweep requires at least one sweep.<axis>")
        sweep = SweepSpec(axes=axes, cap=int(merged["sweep.cap"]))

    times = merged["confinement.times"]
    return ExperimentConfig(
        kind=kind,
        model=model,
        grid=grid,
        solver=solver,
        initial=initial,
        probes=probes,
        output_dir=str(merged["output_dir"]),
        seed=int(merged["seed"]),
        sweep=sweep,
        pct_t_star=float(merged["pct.t_star"]),
        confinement_times=tuple(float(v) for v in times),
    )


def resolved_config_dict(cfg: ExperimentConfig) -> dict:
    """Full config, defaults included, for echoing into summary.json."""
    init: dict = {"kind": type(cfg.initial).__name__}
    for k, v in vars(cfg.initial).items():
        init[k] = [v.real, v.imag] if isinstance(v, complex) else (
            list(v) if isinstance(v, tuple) else v
        )
    return {
        "kind": cfg.kind.value,
        "output_dir": cfg.output_dir,
        "seed": cfg.seed,
        "model": {
            "dim": cfg.model.dim,
            "alpha": cfg.model.alpha,
            "kappa_re": cfg.model.kappa.real,
            "kappa_im": cfg.model.kappa.imag,
        },
        "grid": {
            "dim": cfg.grid.dim,
            "box_length": cfg.grid.box_length,
            "points": cfg.grid.points,
        },
        "solver": {
            "dt": cfg.solver.dt,
            "t_end": cfg.solver.t_end,
            "safety": cfg.solver.safety,
            "blowup_linf_threshold": cfg.solver.blowup_linf_threshold,
            "blowup_dt_floor": cfg.solver.blowup_dt_floor,
            "diagnostics_cadence": cfg.solver.diagnostics_cadence,
            "spectral_filter": cfg.solver.spectral_filter,
        },
        "initial": init,
        "probes": {
            "median_radius": cfg.probes.median_radius,
            "weighted_l2": cfg.probes.weighted_l2,
            "localized_mass": cfg.probes.localized_mass,
            "scatter": cfg.probes.scatter,
            "checkpoint_every": cfg.probes.checkpoint_every,
            "lambdas": list(cfg.probes.lambdas),
        },
        "sweep": None if cfg.sweep is None else {
            "axes": cfg.sweep.axes, "cap": cfg.sweep.cap
        },
        "pct": {"t_star": cfg.pct_t_star},
        "confinement": {"times": list(cfg.confinement_times)},
    }
