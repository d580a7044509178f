"""Rigid-body and multibody dynamics of the hybrid rolling/flying vehicle.

Three dynamics models share one state layout:

``quadrotor``   single rigid body, mass ``m_t`` and inertia ``I_t``
``rollocopter`` flying multibody model with two passive coaxial wheels
``rolling``     no-slip rolling on flat ground, expressed in the level contact frame

Gravity acts on the translational equation explicitly; ``F_e`` never contains it.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import InfeasibleAllocation, NonFiniteState, SingularInertia
from .quaternion import IDENTITY

MODES = {"quadrotor": K.MODE_QUADROTOR, "rollocopter": K.MODE_ROLLOCOPTER, "rolling": K.MODE_ROLLING}

ROTOR_SPEED_MAX = 1500.0
ALLOCATION_TOL = 1e-9
SINGULAR_COND = 1e12


def _vec(value, n=3):
    return np.array(value, dtype=float).reshape(n)


@dataclass
class RigidState:
    r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: IDENTITY.copy())
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gamma_l: float = 0.0
    gamma_r: float = 0.0

    def __post_init__(self):
        self.r = _vec(self.r)
        self.q = _vec(self.q, 4)
        self.v = _vec(self.v)
        self.omega = _vec(self.omega)
        self.gamma_l = float(self.gamma_l)
        self.gamma_r = float(self.gamma_r)

    def to_vector(self):
        return np.concatenate([self.r, self.q, self.v, self.omega, [self.gamma_l, self.gamma_r]])

    @classmethod
    def from_vector(cls, x):
        return cls(x[0:3], x[3:7], x[7:10], x[10:13], x[13], x[14])

    def copy(self):
        return RigidState.from_vector(self.to_vector())


@dataclass
class StateDerivative:
    r_dot: np.ndarray
    q_dot: np.ndarray
    v_dot: np.ndarray
    omega_dot: np.ndarray
    gamma_dot_l: float
    gamma_dot_r: float

    @classmethod
    def from_vector(cls, dx):
        return cls(dx[0:3].copy(), dx[3:7].copy(), dx[7:10].copy(), dx[10:13].copy(),
                   float(dx[13]), float(dx[14]))

    def to_vector(self):
        return np.concatenate([self.r_dot, self.q_dot, self.v_dot, self.omega_dot,
                               [self.gamma_dot_l, self.gamma_dot_r]])


@dataclass
class ControlWrench:
    """Collective thrust along body z and body moment.

    ``F_in_x`` is the rolling-mode propulsive force along the contact-frame x
    axis (the horizontal share of the tilted thrust); flight ignores it.
    """

    F_in_z: float = 0.0
    M_in: np.ndarray = field(default_factory=lambda: np.zeros(3))
    F_in_x: float = 0.0

    def __post_init__(self):
        self.F_in_z = float(self.F_in_z)
        self.F_in_x = float(self.F_in_x)
        self.M_in = _vec(self.M_in)
        if self.F_in_z < 0.0:
            raise ValueError(f"F_in_z must be non-negative, got {self.F_in_z}")

    @property
    def F_in(self):
        return np.array([self.F_in_x, 0.0, self.F_in_z])

    def as_vector(self):
        """``[F_in_z, M_x, M_y, M_z]``, the mixing-matrix ordering."""
        return np.array([self.F_in_z, *self.M_in])


@dataclass
class Externals:
    F_e: np.ndarray = field(default_factory=lambda: np.zeros(3))
    M_e: np.ndarray = field(default_factory=lambda: np.zeros(3))
    M_w_l: float = 0.0
    M_w_r: float = 0.0

    def __post_init__(self):
        self.F_e = _vec(self.F_e)
        self.M_e = _vec(self.M_e)
        self.M_w_l = float(self.M_w_l)
        self.M_w_r = float(self.M_w_r)


def mixing_matrix(p):
    """4x8 map from squared propeller speeds to ``[F_z, M_x, M_y, M_z]``."""
    ct, cq, l = p.C_T, p.C_Q, p.l
    return np.array([
        [ct] * 8,
        [-l * ct, l * ct, l * ct, -l * ct, l * ct, -l * ct, -l * ct, l * ct],
        [-l * ct, -l * ct, l * ct, l * ct, -l * ct, -l * ct, l * ct, l * ct],
        [-cq, cq, -cq, cq, cq, -cq, cq, -cq],
    ])


def mix_rotor_speeds(n_bar, p):
    n_bar = np.asarray(n_bar, dtype=float).reshape(8)
    if np.any(n_bar < 0.0):
        raise ValueError("rotor speeds must be non-negative")
    out = mixing_matrix(p) @ (n_bar * n_bar)
    return ControlWrench(F_in_z=max(out[0], 0.0), M_in=out[1:])


def allocate_wrench(w, p, saturate=False):
    """Minimum-norm rotor speeds producing ``w``.

    With ``saturate=True`` the squared speeds are clipped to the rotor limits
    instead of raising; the realised wrench then differs from ``w``.
    """
    n2 = np.linalg.pinv(mixing_matrix(p)) @ w.as_vector()
    if saturate:
        n2 = np.clip(n2, 0.0, ROTOR_SPEED_MAX ** 2)
    else:
        if np.any(n2 < -ALLOCATION_TOL):
            raise InfeasibleAllocation(f"negative squared speed {n2.min():.3e}")
        n2 = np.maximum(n2, 0.0)
    return np.sqrt(n2)


def _inputs(u, ext):
    vec = np.zeros(K.INPUT_SIZE)
    vec[0] = u.F_in_z
    vec[1] = u.F_in_x
    vec[2:5] = u.M_in
    vec[5:8] = ext.F_e
    vec[8:11] = ext.M_e
    vec[11] = ext.M_w_l
    vec[12] = ext.M_w_r
    return vec


def mass_matrix(p):
    """Rotational/wheel mass matrix acting on ``(omega_dot, gamma_dot_l, gamma_dot_r)``."""
    c = 2.0 * p.m_w * p.L ** 2
    M = np.zeros((5, 5))
    M[0, 0] = p.I_t[0] + c
    M[1, 1] = p.I_t[1]
    M[2, 2] = p.I_t[2] + c
    M[1, 3] = M[1, 4] = M[3, 1] = M[4, 1] = p.I_w
    M[3, 3] = M[4, 4] = p.I_w
    return M


def check_mass_matrix(p):
    if p.I_w == 0.0:
        # wheel rows drop out; only the body block must be invertible
        M = mass_matrix(p)[:3, :3]
    else:
        M = mass_matrix(p)
    if np.linalg.cond(M) > SINGULAR_COND:
        raise SingularInertia(f"mass matrix condition {np.linalg.cond(M):.3e}")


def quadrotor_derivative(s, u, F_e, M_e, p):
    x = s.to_vector()
    dx = K.quadrotor_deriv(x, _inputs(u, Externals(F_e, M_e)), p.as_array())
    return StateDerivative.from_vector(dx)


def rollocopter_derivative(s, u, F_e, M_e, M_w_l, M_w_r, p):
    check_mass_matrix(p)
    x = s.to_vector()
    dx = K.rollocopter_deriv(x, _inputs(u, Externals(F_e, M_e, M_w_l, M_w_r)), p.as_array())
    return StateDerivative.from_vector(dx)


def rolling_derivative(s, u, F_e, M_e, p):
    dx = K.rolling_deriv(s.to_vector(), _inputs(u, Externals(F_e, M_e)), p.as_array())
    return StateDerivative.from_vector(dx)


def rolling_constrained_velocity(gamma_l, gamma_r, omega_y, p):
    """Forward speed, lateral speed and yaw rate implied by no-slip rolling."""
    v_x = 0.5 * p.R * (gamma_r + gamma_l + 2.0 * omega_y)
    omega_z = p.R / (2.0 * p.L) * (gamma_r - gamma_l)
    return v_x, 0.0, omega_z


def rolling_state(gamma_l, gamma_r, omega_y, p, r=(0.0, 0.0, 0.0), yaw=0.0):
    """A state on the rolling manifold with the given wheel rates and heading."""
    v_x, _, omega_z = rolling_constrained_velocity(gamma_l, gamma_r, omega_y, p)
    q = np.array([np.cos(yaw / 2.0), 0.0, 0.0, np.sin(yaw / 2.0)])
    return RigidState(r=r, q=q, v=[v_x, 0.0, 0.0], omega=[0.0, omega_y, omega_z],
                      gamma_l=gamma_l, gamma_r=gamma_r)


def step(s, u, externals, dt, p, mode="quadrotor"):
    """One RK4 step of the selected dynamics; rolling states are projected onto the constraint."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    code = MODES[mode]
    if code == K.MODE_ROLLOCOPTER:
        check_mass_matrix(p)
    if externals is None:
        externals = Externals()
    x = K.rk4_step(code, s.to_vector(), _inputs(u, externals), p.as_array(), float(dt))
    if not np.all(np.isfinite(x)):
        raise NonFiniteState("integration produced a non-finite state")
    return RigidState.from_vector(x)


def step_vector(code, x, u_vec, p_arr, dt):
    """Array-level step for the simulator's inner loop (no dataclass round trip)."""
    x = K.rk4_step(code, x, u_vec, p_arr, dt)
    if not np.all(np.isfinite(x)):
        raise NonFiniteState("integration produced a non-finite state")
    return x


def mechanical_energy(s, p, mode="quadrotor"):
    """Kinetic plus gravitational potential energy of a flying state."""
    v2 = float(s.v @ s.v)
    trans = 0.5 * p.m_t * v2
    pot = p.m_t * p.g * s.r[2]
    if mode == "quadrotor":
        rot = 0.5 * float(np.sum(p.I_t * s.omega ** 2))
    else:
        xi = np.concatenate([s.omega, [s.gamma_l, s.gamma_r]])
        rot = 0.5 * float(xi @ mass_matrix(p) @ xi)
    return trans + rot + pot


