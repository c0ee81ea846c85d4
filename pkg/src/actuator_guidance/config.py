"""Scenario configuration: YAML file schema, presets and validation.

A config file is a YAML mapping whose keys are the fields of
:class:`ScenarioConfig` (nested mappings for ``optimizer``, ``mobility`` and
``disturbance``). Missing keys take the defaults of the chosen ``preset``;
unknown keys are rejected. Environment variables ``ACTGUIDE_<FIELD>``
(e.g. ``ACTGUIDE_GRID_STEPS=200``) override top-level scalar fields.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

ENV_PREFIX = "ACTGUIDE_"

DEFAULT_POSITIONS = ((0.1, 0.1), (0.125, 0.1), (0.125, 0.125), (0.1, 0.125))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizerSettings:
    max_iters: int = 500
    grad_rtol: float = 1e-4
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo_c: float = 1e-4
    barzilai_borwein: bool = True
    ftol: float = 1e-5
    ftol_window: int = 5
    initial_guess: str = "naive"


INITIAL_GUESSES = ("naive", "zero")


@dataclass(frozen=True)
class MobilitySettings:
    preset: str = "quadratic"
    weight: float = 0.1


@dataclass(frozen=True)
class DisturbanceSettings:
    enabled: bool = True
    amplitude: float = 0.5
    sigma: float = 0.05


@dataclass(frozen=True)
class ScenarioConfig:
    preset: str = "dirichlet-paper"
    bc: str = "dirichlet"
    n_modes: int = 13
    quad_order: int | None = None
    t_final: float = 1.0
    grid_steps: int = 1000
    diffusivity: float = 0.05
    velocity: tuple[float, float] = (0.1, -0.1)
    initial_condition: str = "bubble"
    actuator_positions: tuple[tuple[float, float], ...] = DEFAULT_POSITIONS
    sigma: float = 0.05
    control_weight: float = 0.1
    state_weight: float = 1.0
    terminal_weight: float = 1.0
    guidance_lower: float = -100.0
    guidance_upper: float = 100.0
    p_max: float = 100.0
    a_max: float = 100.0
    local_gain: float = 0.1
    convergence_modes: tuple[int, ...] = tuple(range(6, 21))
    snapshot_times: tuple[float, ...] = (0.05, 0.2, 1.0)
    raster: int = 101
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    mobility: MobilitySettings = field(default_factory=MobilitySettings)
    disturbance: DisturbanceSettings = field(default_factory=DisturbanceSettings)

    def to_dict(self) -> dict[str, Any]:
        return _plain(asdict(self))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


PRESETS: dict[str, dict[str, Any]] = {
    "dirichlet-paper": {"bc": "dirichlet"},
    "neumann-paper": {"bc": "neumann"},
}

INITIAL_CONDITIONS = ("bubble", "constant")
_NESTED = {
    "optimizer": OptimizerSettings,
    "mobility": MobilitySettings,
    "disturbance": DisturbanceSettings,
}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _tupleize(value):
    if isinstance(value, list):
        return tuple(_tupleize(v) for v in value)
    return value


def from_dict(data: dict[str, Any] | None) -> ScenarioConfig:
    """Build and validate a config from a plain mapping (preset defaults first)."""
    data = dict(data or {})
    preset = data.get("preset", "dirichlet-paper")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    merged: dict[str, Any] = {"preset": preset, **PRESETS[preset]}
    for key, value in data.items():
        if key in _NESTED:
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be a mapping")
            sub_known = {f.name for f in fields(_NESTED[key])}
            bad = sorted(set(value) - sub_known)
            if bad:
                raise ConfigError(f"unknown keys in {key}: {', '.join(bad)}")
            merged[key] = _NESTED[key](**value)
        else:
            merged[key] = _tupleize(value)
    cfg = ScenarioConfig(**merged)
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    try:
        _check(cfg)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config value: {exc}") from None


def _check(cfg: ScenarioConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(cfg.bc in ("dirichlet", "neumann"), f"bc must be dirichlet or neumann, got {cfg.bc!r}")
    need(isinstance(cfg.n_modes, int) and cfg.n_modes >= 1, "n_modes must be a positive integer")
    need(cfg.quad_order is None or cfg.quad_order >= cfg.n_modes + 2,
         "quad_order must be at least n_modes + 2")
    need(cfg.t_final > 0, "t_final must be positive")
    need(isinstance(cfg.grid_steps, int) and cfg.grid_steps >= 1, "grid_steps must be a positive integer")
    need(cfg.diffusivity > 0, "diffusivity must be positive")
    need(len(cfg.velocity) == 2, "velocity must have two components")
    need(cfg.initial_condition in INITIAL_CONDITIONS,
         f"initial_condition must be one of {INITIAL_CONDITIONS}")
    need(len(cfg.actuator_positions) >= 1, "at least one actuator is required")
    for pos in cfg.actuator_positions:
        need(len(pos) == 2 and all(0.0 <= c <= 1.0 for c in pos),
             f"actuator position {pos} must be a point of the unit square")
    need(cfg.sigma > 0, f"kernel width sigma must be positive, got {cfg.sigma}")
    need(cfg.control_weight > 0, "control_weight must be positive (R positive definite)")
    need(cfg.state_weight >= 0 and cfg.terminal_weight >= 0, "state weights must be nonnegative")
    need(cfg.guidance_lower < 0 < cfg.guidance_upper,
         "guidance box must contain zero in its interior")
    need(cfg.p_max > 0 and cfg.a_max > 0, "p_max and a_max must be positive")
    need(all(isinstance(n, int) and 1 <= n <= 30 for n in cfg.convergence_modes),
         "convergence_modes must be integers in 1..30")
    need(all(0 <= t <= cfg.t_final for t in cfg.snapshot_times), "snapshot times must lie in [0, t_final]")
    need(cfg.raster >= 2, "raster must be at least 2")
    o = cfg.optimizer
    need(o.max_iters >= 0 and o.grad_rtol > 0 and o.initial_step > 0 and o.armijo_c > 0,
         "optimizer settings must be positive")
    need(0 < o.shrink < 1, "optimizer shrink must lie in (0, 1)")
    need(o.ftol >= 0 and o.ftol_window >= 1, "optimizer ftol must be nonnegative with a positive window")
    need(o.initial_guess in INITIAL_GUESSES, f"optimizer initial_guess must be one of {INITIAL_GUESSES}")
    need(cfg.mobility.preset == "quadratic", "only the quadratic mobility preset is available")
    need(cfg.mobility.weight > 0, "mobility weight must be positive")
    need(cfg.disturbance.sigma > 0, "disturbance sigma must be positive")


def _env_overrides(data: dict[str, Any], environ) -> dict[str, Any]:
    out = dict(data)
    for f in fields(ScenarioConfig):
        key = ENV_PREFIX + f.name.upper()
        if key in environ and f.name not in _NESTED:
            try:
                out[f.name] = yaml.safe_load(environ[key])
            except yaml.YAMLError as exc:
                raise ConfigError(f"bad value in {key}: {exc}") from None
    return out


def load_config(path: str | os.PathLike | None = None, environ=None) -> ScenarioConfig:
    """Parse ``path`` (or defaults when None), apply env overrides, validate."""
    data: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text()
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            problem = getattr(exc, "problem", None) or str(exc)
            raise ConfigError(f"cannot parse {path}{where}: {problem}") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        data = loaded
    data = _env_overrides(data, os.environ if environ is None else environ)
    return from_dict(data)


def save_config(cfg: ScenarioConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))


def with_overrides(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    """Copy of ``cfg`` with top-level or dotted nested fields replaced."""
    top: dict[str, Any] = {}
    nested: dict[str, dict[str, Any]] = {}
    for key, value in changes.items():
        if value is None:
            continue
        if "." in key:
            group, name = key.split(".", 1)
            nested.setdefault(group, {})[name] = value
        else:
            top[key] = value
    for group, vals in nested.items():
        top[group] = replace(getattr(cfg, group), **vals)
    new = replace(cfg, **top)
    validate(new)
    return new


__all__ = [
    "ConfigError",
    "DisturbanceSettings",
    "MobilitySettings",
    "OptimizerSettings",
    "ScenarioConfig",
    "load_config",
    "save_config",
    "from_dict",
    "validate",
    "with_overrides",
    "PRESETS",
]
