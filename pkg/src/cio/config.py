"""Scenario configuration: a versioned YAML document with nested sections.

Every section maps onto a dataclass.  Unknown keys are rejected, and errors
name the offending key with its dotted path (``noise.accel_sigma``).
"""

import dataclasses
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .errors import ConfigError
from .params import VehicleParams
from .reactive_planner import PlannerConfig
from .velocity_controller import ControllerGains

SCHEMA_VERSION = 1
MODES = ("flying", "rolling", "bouncing")
FEEDBACK = ("estimate", "truth")
ENV_KINDS = ("empty", "corridor", "maze", "walls")


@dataclass
class EnvironmentSpec:
    kind: str = "empty"
    cells: int = 6
    corridor: float = 1.5
    wall_thickness: float = 0.1
    wall_height: float = 3.0
    maze_seed: int = 3
    wall_x: float = 3.0
    walls: list = field(default_factory=list)
    ground: bool = True
    restitution: float = 0.0
    friction: float = 0.0
    radius: float = 0.3
    pulse_duration: float = 0.05

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise ConfigError("environment.kind", f"expected one of {ENV_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.restitution <= 1.0:
            raise ConfigError("environment.restitution", "must lie in [0, 1]")
        if self.friction < 0.0:
            raise ConfigError("environment.friction", "must be non-negative")
        for name in ("corridor", "wall_thickness", "wall_height", "radius", "pulse_duration"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"environment.{name}", "must be positive")
        if self.cells < 1:
            raise ConfigError("environment.cells", "must be at least 1")
        for i, box in enumerate(self.walls):
            b = np.asarray(box, dtype=float)
            if b.shape != (6,) or np.any(b[3:] <= b[:3]):
                raise ConfigError(f"environment.walls[{i}]", "expected [xmin, ymin, zmin, xmax, ymax, zmax] with positive extents")


@dataclass
class NoiseSpec:
    accel_sigma: float = 0.05
    gyro_sigma: float = 0.001
    accel_bias: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    encoder_sigma: float = 0.01

    def __post_init__(self):
        for name in ("accel_sigma", "gyro_sigma", "encoder_sigma"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"noise.{name}", "must be non-negative")
        if np.shape(self.accel_bias) != (3,):
            raise ConfigError("noise.accel_bias", "expected 3 values")


@dataclass
class FilterSpec:
    accel_var_rate: float = 0.1
    gyro_sigma: float = 1e-3
    pos_var_rate: float = 2e-6
    r_sigma: float = 0.05
    anisotropic: bool = False
    p0_velocity: float = 0.01

    def __post_init__(self):
        for name in ("accel_var_rate", "gyro_sigma", "pos_var_rate", "r_sigma", "p0_velocity"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"filter.{name}", "must be non-negative")
        if self.r_sigma == 0.0:
            raise ConfigError("filter.r_sigma", "must be positive")


@dataclass
class EstimatorSpec:
    threshold: float = 0.0
    refractory: float = 0.3
    sustain: float = 0.5
    weights: list = field(default_factory=lambda: [1.0, 0.0, 0.0])

    def __post_init__(self):
        if self.threshold < 0.0:
            raise ConfigError("estimator.threshold", "must be non-negative (0 selects the default)")
        if self.refractory < 0.0:
            raise ConfigError("estimator.refractory", "must be non-negative")
        if self.sustain < 0.0:
            raise ConfigError("estimator.sustain", "must be non-negative (0 disables re-triggering)")
        if np.shape(self.weights) != (3,):
            raise ConfigError("estimator.weights", "expected 3 values")


@dataclass
class InitialSpec:
    position: list = field(default_factory=lambda: [0.0, 0.0, 1.0])
    velocity: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("position", "velocity"):
            if np.shape(getattr(self, name)) != (3,):
                raise ConfigError(f"initial.{name}", "expected 3 values")


@dataclass
class BounceSpec:
    offset: float = -0.15


@dataclass
class RollingSpec:
    speed: float = 0.5
    yaw_rate: float = 0.6
    half_period: float = 10.0
    resistance: list = field(default_factory=lambda: [-1.0, 0.0, 0.0])
    kp_speed: float = 4.0
    kp_yaw: float = 6.0
    kd_pitch: float = 0.5


@dataclass
class ScenarioConfig:
    version: int = SCHEMA_VERSION
    name: str = "scenario"
    mode: str = "flying"
    duration: float = 10.0
    seed: int = 0
    comparison: bool = True
    cio: bool = True
    feedback: str = "estimate"
    hold_height: bool = True
    record_ticks: bool = True
    external_force: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    environment: EnvironmentSpec = field(default_factory=EnvironmentSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    filter: FilterSpec = field(default_factory=FilterSpec)
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    controller: ControllerGains = field(default_factory=ControllerGains)
    initial: InitialSpec = field(default_factory=InitialSpec)
    bounce: BounceSpec = field(default_factory=BounceSpec)
    rolling: RollingSpec = field(default_factory=RollingSpec)

    def __post_init__(self):
        if self.version != SCHEMA_VERSION:
            raise ConfigError("version", f"unsupported schema version {self.version}")
        if self.mode not in MODES:
            raise ConfigError("mode", f"expected one of {MODES}, got {self.mode!r}")
        if self.feedback not in FEEDBACK:
            raise ConfigError("feedback", f"expected one of {FEEDBACK}, got {self.feedback!r}")
        if not self.duration > 0.0:
            raise ConfigError("duration", "must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        if np.shape(self.external_force) != (3,):
            raise ConfigError("external_force", "expected 3 values")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


_SECTIONS = {
    "environment": EnvironmentSpec,
    "noise": NoiseSpec,
    "filter": FilterSpec,
    "estimator": EstimatorSpec,
    "planner": PlannerConfig,
    "controller": ControllerGains,
    "initial": InitialSpec,
    "bounce": BounceSpec,
    "rolling": RollingSpec,
}


def _build(cls, data, prefix):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(prefix, "expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{prefix}.{key}", "unknown key")
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(prefix, str(exc)) from exc


def _vehicle(value, base_dir):
    if value is None:
        return VehicleParams.load()
    if isinstance(value, str):
        path = value if os.path.isabs(value) else os.path.join(base_dir, value)
        if not os.path.exists(path):
            raise ConfigError("vehicle", f"parameter file not found: {path}")
        return VehicleParams.load(path)
    if isinstance(value, dict):
        merged = VehicleParams.load().to_dict()
        unknown = sorted(set(value) - set(merged))
        if unknown:
            raise ConfigError(f"vehicle.{unknown[0]}", "unknown parameter")
        merged.update(value)
        return VehicleParams.from_dict(merged)
    raise ConfigError("vehicle", "expected a mapping of overrides or a file path")


def from_dict(data, base_dir="."):
    if not isinstance(data, dict):
        raise ConfigError("<root>", "configuration must be a mapping")
    if "version" not in data:
        raise ConfigError("version", "missing schema version")
    top = {f.name for f in dataclasses.fields(ScenarioConfig)}
    for key in data:
        if key not in top:
            raise ConfigError(key, "unknown key")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        elif key == "vehicle":
            kwargs[key] = _vehicle(value, base_dir)
        else:
            kwargs[key] = value
    if "vehicle" not in kwargs:
        kwargs["vehicle"] = VehicleParams.load()
    try:
        return ScenarioConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("<root>", str(exc)) from exc


def load(path):
    if not os.path.exists(path):
        raise ConfigError("config", f"file not found: {path}")
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"not valid YAML: {exc}") from exc
    return from_dict(data, os.path.dirname(os.path.abspath(path)))


def bundled(name):
    """Path of a configuration shipped with the package, e.g. ``bundled("maze")``."""
    fname = name if name.endswith(".cfg") else f"{name}.cfg"
    return str(resources.files("cio.configs").joinpath(fname))


def bundled_names():
    return sorted(p.name[:-4] for p in resources.files("cio.configs").iterdir() if p.name.endswith(".cfg"))
