"""Reference velocities from collisions: specular bounce, cone bounce and vertical bouncing."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParallelDegenerate, ZeroForce
from .quaternion import rodrigues

EPS_FORCE = 1e-6
PARALLEL_TOL = 1e-9
INIT, COLLISION, VERTICAL_BOUNCE = "init", "collision", "vertical_bounce"


@dataclass
class PlannerConfig:
    v_nom: float = 1.0
    dpsi_min: float = np.deg2rad(30.0)
    dpsi_max: float = np.deg2rad(60.0)
    bounce_period: float = 2.0
    bounce_amplitude: float = 0.5
    rng_seed: int = 0
    planar: bool = False
    initial_direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        self.initial_direction = np.array(self.initial_direction, dtype=float).reshape(3)
        if not self.v_nom > 0.0:
            raise ValueError("v_nom must be positive")
        if not 0.0 <= self.dpsi_min <= self.dpsi_max < np.pi / 2:
            raise ValueError("need 0 <= dpsi_min <= dpsi_max < pi/2")
        if not self.bounce_period > 0.0:
            raise ValueError("bounce_period must be positive")


@dataclass
class ReferenceVelocity:
    v_ref: np.ndarray
    t_issued: float
    cause: str

    def to_record(self):
        return {"t": self.t_issued, "v_ref": [float(x) for x in self.v_ref], "cause": self.cause}


def _force(F_e):
    F = np.asarray(F_e, dtype=float)
    n = np.linalg.norm(F)
    if n <= EPS_FORCE:
        raise ZeroForce(f"|F_e| = {n:.3e} N")
    return F, n


def specular_bounce(v_prev, F_e):
    """Mirror ``v_prev`` across the plane orthogonal to the contact force."""
    F, _ = _force(F_e)
    v = np.asarray(v_prev, dtype=float)
    return v - 2.0 * (v @ F) / (F @ F) * F


def cone_bounce(v_prev_ref, F_e, dpsi, cfg):
    """Tilt the force direction by ``dpsi`` toward the previous reference, at speed ``v_nom``."""
    F, n = _force(F_e)
    f_hat = F / n
    v = np.asarray(v_prev_ref, dtype=float)
    vn = np.linalg.norm(v)
    if vn == 0.0:
        raise ValueError("previous reference must be non-zero")
    axis = np.cross(f_hat, v)
    an = np.linalg.norm(axis)
    if an < PARALLEL_TOL * vn:
        raise ParallelDegenerate("reference is parallel to the contact force")
    out = rodrigues(f_hat, axis / an, dpsi)
    return cfg.v_nom * out / np.linalg.norm(out)


def sample_cone_angle(rng, cfg):
    return float(rng.uniform(cfg.dpsi_min, cfg.dpsi_max))


def vertical_bounce_reference(t, cfg):
    """Square wave: up for the first half of each period, down for the second."""
    phase = (t / cfg.bounce_period) % 1.0
    return cfg.bounce_amplitude if phase < 0.5 else -cfg.bounce_amplitude


def random_orthogonal_axis(rng, f_hat, planar=False):
    """Uniform unit vector orthogonal to ``f_hat``; in planar mode the vertical axis."""
    if planar:
        return np.array([0.0, 0.0, 1.0 if rng.random() < 0.5 else -1.0])
    helper = np.array([1.0, 0.0, 0.0]) if abs(f_hat[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(f_hat, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(f_hat, e1)
    phi = rng.uniform(0.0, 2.0 * np.pi)
    return np.cos(phi) * e1 + np.sin(phi) * e2


class ReactivePlanner:
    """Event-driven cone planner owning its RNG.

    In planar mode only the horizontal parts of the force and the reference are
    used; the vertical reference is left to the height behaviour.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.rng_seed)
        d = cfg.initial_direction / np.linalg.norm(cfg.initial_direction)
        self.current = ReferenceVelocity(cfg.v_nom * d, 0.0, INIT)
        self.history = [self.current]

    def _project(self, vec):
        out = np.array(vec, dtype=float)
        if self.cfg.planar:
            out[2] = 0.0
        return out

    def on_collision(self, t, F_e_world):
        F = self._project(F_e_world)
        v_prev = self._project(self.current.v_ref)
        if np.linalg.norm(F) <= EPS_FORCE:
            return None
        dpsi = sample_cone_angle(self.rng, self.cfg)
        try:
            v_ref = cone_bounce(v_prev, F, dpsi, self.cfg)
        except ParallelDegenerate:
            f_hat = F / np.linalg.norm(F)
            axis = random_orthogonal_axis(self.rng, f_hat, self.cfg.planar)
            v_ref = self.cfg.v_nom * rodrigues(f_hat, axis, dpsi)
        self.current = ReferenceVelocity(v_ref, float(t), COLLISION)
        self.history.append(self.current)
        return self.current
