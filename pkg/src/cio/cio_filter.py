"""IMU-only EKF with collision pseudo-measurements.

Mean ``x = [r(3), q(4), v(3), omega(3)]``: world position, body-to-world
attitude, body-frame velocity and body rate.  The covariance lives on the
12-dim error state ``[dr, dtheta, dv, domega]`` with the attitude error applied
on the right, ``q = q_hat * exp(dtheta)``.

The filter carries no bias states.  A collision gives a velocity
pseudo-measurement: after the hit the body keeps only the velocity component
orthogonal to the contact force.
"""

from dataclasses import dataclass, field

import numpy as np

from ._jit import njit
from .errors import IllConditionedInnovation, NonFiniteState, ZeroForce
from .quaternion import IDENTITY, quat_exp, quat_mul, quat_normalize, rotation_matrix, skew

EPS_FORCE = 1e-6
MAX_INNOVATION_COND = 1e12
DEFAULT_R_SIGMA = 0.05
ANISOTROPY = 10.0

# error-state blocks
IR, ITH, IV, IW = slice(0, 3), slice(3, 6), slice(6, 9), slice(9, 12)


@dataclass
class FilterState:
    x: np.ndarray = field(default_factory=lambda: np.concatenate([np.zeros(3), IDENTITY, np.zeros(6)]))
    P: np.ndarray = field(default_factory=lambda: np.zeros((12, 12)))
    t: float = 0.0

    @property
    def r(self):
        return self.x[0:3]

    @property
    def q(self):
        return self.x[3:7]

    @property
    def v(self):
        return self.x[7:10]

    @property
    def omega(self):
        return self.x[10:13]

    def v_world(self):
        return rotation_matrix(self.q) @ self.v

    def copy(self):
        return FilterState(self.x.copy(), self.P.copy(), self.t)


@dataclass
class PseudoMeasurement:
    z: np.ndarray
    R_k: np.ndarray


def initial_state(r=(0.0, 0.0, 0.0), q=IDENTITY, v=(0.0, 0.0, 0.0), P0=None, t=0.0):
    x = np.concatenate([np.asarray(r, float), np.asarray(q, float), np.asarray(v, float), np.zeros(3)])
    P = np.zeros((12, 12)) if P0 is None else np.array(P0, dtype=float)
    return FilterState(x, P, float(t))


def default_process_noise(dt=0.005, accel_var_rate=0.1, gyro_sigma=1e-3, pos_var_rate=2e-6):
    """Per-step Q.  ``accel_var_rate`` (m^2/s^3) of 0.1 reaches about 1 m/s std after 10 s."""
    Q = np.zeros((12, 12))
    Q[IR, IR] = pos_var_rate * dt * np.eye(3)
    Q[ITH, ITH] = (gyro_sigma * dt) ** 2 * np.eye(3)
    Q[IV, IV] = accel_var_rate * dt * np.eye(3)
    Q[IW, IW] = gyro_sigma ** 2 * np.eye(3)
    return Q


@njit
def predict_kernel(x, P, a, w, Q, dt, g):
    """Strapdown propagation of the mean plus the error-state covariance."""
    q = x[3:7]
    Rm = rotation_matrix(q)
    v_b = x[7:10]
    gw = np.array([0.0, 0.0, -g])
    # specific force is an interval average: rotate it with the mid-interval attitude
    R_mid = rotation_matrix(quat_mul(q, quat_exp(0.5 * dt * w)))
    acc_w = R_mid @ a + gw
    v_w = Rm @ v_b
    out = np.empty(13)
    out[0:3] = x[0:3] + v_w * dt + 0.5 * acc_w * dt * dt
    q_new = quat_normalize(quat_mul(q, quat_exp(w * dt)))
    out[3:7] = q_new
    out[7:10] = rotation_matrix(q_new).T @ (v_w + acc_w * dt)
    out[10:13] = w

    F = np.eye(12)
    I3 = np.eye(3)
    F[0:3, 3:6] = -dt * Rm @ skew(v_b)
    F[0:3, 6:9] = dt * Rm
    F[3:6, 3:6] = I3 - dt * skew(w)
    F[6:9, 3:6] = dt * skew(Rm.T @ gw)
    F[6:9, 6:9] = I3 - dt * skew(w)
    # the body rate is replaced by the gyro sample: its error is the gyro noise alone
    F[9:12, 9:12] = np.zeros((3, 3))
    P_new = F @ P @ F.T + Q
    P_new = 0.5 * (P_new + P_new.T)
    return out, P_new


def predict(fs, imu, Q, dt, g=9.81):
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x, P = predict_kernel(fs.x, fs.P, np.asarray(imu.a, float), np.asarray(imu.omega, float),
                          np.asarray(Q, float), float(dt), float(g))
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(P))):
        raise NonFiniteState("filter prediction produced a non-finite value")
    return FilterState(x, P, fs.t + dt)


def _check_force(F_e):
    F = np.asarray(F_e, dtype=float)
    if np.linalg.norm(F) <= EPS_FORCE:
        raise ZeroForce(f"|F_e| = {np.linalg.norm(F):.3e} N")
    return F


def parallel_velocity(v_prev, F_e):
    """Component of ``v_prev`` orthogonal to the contact force."""
    F = _check_force(F_e)
    v = np.asarray(v_prev, dtype=float)
    return v - (v @ F) / (F @ F) * F


def measurement_covariance(F_e=None, sigma=DEFAULT_R_SIGMA, anisotropic=False):
    """Isotropic ``sigma^2 I``; the anisotropic form inflates the tangential directions."""
    if not anisotropic:
        return sigma ** 2 * np.eye(3)
    n = _check_force(F_e)
    n = n / np.linalg.norm(n)
    N = np.outer(n, n)
    return sigma ** 2 * (N + ANISOTROPY * (np.eye(3) - N))


def _velocity_update(fs, z, R_k):
    H = np.zeros((3, 12))
    H[:, IV] = np.eye(3)
    R_k = np.asarray(R_k, dtype=float)
    S = H @ fs.P @ H.T + R_k
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > MAX_INNOVATION_COND:
        raise IllConditionedInnovation(f"cond(S) = {cond:.3e}")
    K = np.linalg.solve(S, H @ fs.P).T
    dx = K @ (z - fs.v)
    x = fs.x.copy()
    x[0:3] += dx[IR]
    x[3:7] = quat_normalize(quat_mul(fs.q, quat_exp(dx[ITH])))
    x[7:10] += dx[IV]
    x[10:13] += dx[IW]
    A = np.eye(12) - K @ H
    P = A @ fs.P @ A.T + K @ R_k @ K.T
    P = 0.5 * (P + P.T)
    return FilterState(x, P, fs.t)


def contact_update(fs, F_e, R_k=None):
    """Collision pseudo-measurement: ``z`` is the current velocity with the force-aligned part removed."""
    z = parallel_velocity(fs.v, F_e)
    if R_k is None:
        R_k = measurement_covariance()
    return _velocity_update(fs, z, R_k)


def zero_velocity_update(fs, R_k=None):
    if R_k is None:
        R_k = measurement_covariance()
    return _velocity_update(fs, np.zeros(3), R_k)


def velocity_trace(fs):
    return float(np.trace(fs.P[IV, IV]))
