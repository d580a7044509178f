"""Vehicle parameters."""

from dataclasses import asdict, dataclass, field, replace
from importlib import resources

import numpy as np
import yaml

from .errors import ConfigError


def _vec3(value, name):
    arr = np.asarray(value, dtype=float)
    if arr.shape == ():
        arr = np.full(3, float(arr))
    if arr.shape != (3,):
        raise ConfigError(name, f"expected 3 values, got {np.shape(value)}")
    return arr


@dataclass(frozen=True, eq=False)
class VehicleParams:
    m_t: float = 4.036
    m_w: float = 0.283
    I_t: np.ndarray = field(default_factory=lambda: np.array([0.09, 0.074, 0.09]))
    I_b: np.ndarray = field(default_factory=lambda: np.array([0.035, 0.0545, 0.035]))
    I_w: float = 0.00975
    D: float = 0.2286
    C_p: float = 0.11
    C_q: float = 0.008
    rho: float = 1.18
    R: float = 0.2667
    l: float = 0.254
    L: float = 0.3125
    K_F: float = 10.0
    K_M: float = 10.0
    K_w: float = 10.0
    g: float = 9.81

    def __post_init__(self):
        object.__setattr__(self, "I_t", _vec3(self.I_t, "I_t"))
        object.__setattr__(self, "I_b", _vec3(self.I_b, "I_b"))
        for name in ("m_t", "D", "C_p", "C_q", "rho", "R", "l", "L", "K_F", "K_M", "K_w", "g"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise ConfigError(name, f"must be strictly positive, got {value}")
        # wheel terms may vanish: the massless-wheel limit is the plain quadrotor
        for name in ("m_w", "I_w"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0.0:
                raise ConfigError(name, f"must be non-negative, got {value}")
        for name in ("I_t", "I_b"):
            if np.any(getattr(self, name) <= 0.0):
                raise ConfigError(name, "inertias must be strictly positive")

    @property
    def C_T(self):
        return self.rho * self.C_p * self.D ** 4

    @property
    def C_Q(self):
        return self.rho * self.C_q * self.D ** 5

    @property
    def has_wheels(self):
        return self.m_w > 0.0 or self.I_w > 0.0

    def without_wheels(self):
        """Massless-wheel limit: ``m_w = I_w = 0`` and body inertia equal to the total."""
        return replace(self, m_w=0.0, I_w=0.0, I_b=self.I_t.copy())

    def as_array(self):
        """Flat float array consumed by the compiled kernels (see ``_kernels.P_*``)."""
        return np.array([
            self.m_t, self.m_w,
            self.I_t[0], self.I_t[1], self.I_t[2],
            self.I_b[0], self.I_b[1], self.I_b[2],
            self.I_w, self.R, self.L, self.g,
        ])

    def to_dict(self):
        d = asdict(self)
        d["I_t"] = [float(x) for x in self.I_t]
        d["I_b"] = [float(x) for x in self.I_b]
        return d

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"vehicle.{unknown[0]}", "unknown parameter")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError("vehicle", str(exc)) from exc

    @classmethod
    def load(cls, path=None):
        """Read parameters from a YAML file; the bundled default vehicle when ``path`` is None."""
        if path is None:
            text = resources.files("cio.data").joinpath("vehicle.yaml").read_text()
        else:
            with open(path) as fh:
                text = fh.read()
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ConfigError("vehicle", "parameter file must be a mapping")
        return cls.from_dict(data)
