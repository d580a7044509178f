"""Cascaded flight control: velocity -> acceleration -> thrust and attitude -> body moment."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAcceleration
from .quaternion import quat_conj, quat_from_matrix, quat_mul

A_MAX = 5.0
G = 9.81


@dataclass
class ControllerGains:
    kp_vel: float = 3.0
    kp_att: float = 24.0
    kd_att: float = 2.6
    yaw_ref: float = 0.0
    a_max: float = A_MAX
    kp_height: float = 1.5

    def __post_init__(self):
        for name in ("kp_vel", "kp_att", "kd_att", "a_max", "kp_height"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")


def velocity_to_acceleration(v_ref, v_est, gains, g=G):
    """P law on the velocity error plus gravity feed-forward; horizontal part capped."""
    a = gains.kp_vel * (np.asarray(v_ref, float) - np.asarray(v_est, float))
    h = np.hypot(a[0], a[1])
    if h > gains.a_max:
        a[0:2] *= gains.a_max / h
    a[2] += g
    return a


def acceleration_to_attitude_thrust(a_des, yaw, p):
    """Thrust magnitude and the attitude whose body z axis points along ``a_des``."""
    a = np.asarray(a_des, dtype=float)
    n = np.linalg.norm(a)
    if n < 0.1 * p.g:
        raise DegenerateAcceleration(f"|a_des| = {n:.3e} m/s^2")
    z_b = a / n
    x_c = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    y_b = np.cross(z_b, x_c)
    yn = np.linalg.norm(y_b)
    if yn < 1e-9:
        # thrust along the heading: fall back to the heading's lateral axis
        y_b = np.array([-np.sin(yaw), np.cos(yaw), 0.0])
    else:
        y_b /= yn
    x_b = np.cross(y_b, z_b)
    return p.m_t * n, quat_from_matrix(np.column_stack([x_b, y_b, z_b]))


def attitude_rate_controller(q_des, q, omega, gains):
    """Quaternion-error PD law; the error is expressed in the body frame."""
    q_e = quat_mul(quat_conj(np.asarray(q, float)), np.asarray(q_des, float))
    s = 1.0 if q_e[0] >= 0.0 else -1.0
    return gains.kp_att * 2.0 * s * q_e[1:4] - gains.kd_att * np.asarray(omega, float)


def height_hold(z_true, z_ref, gains):
    """Vertical velocity reference from the true height (the maze's separate height sensor)."""
    return gains.kp_height * (z_ref - z_true)
