"""Compiled inner loops for the vehicle dynamics.

Flat layouts used by every kernel:

state ``x`` (15):  r[0:3] q[3:7] v[7:10] omega[10:13] gamma_l[13] gamma_r[14]
input ``u`` (13):  F_in_z, F_in_x, M_in[2:5], F_e[5:8], M_e[8:11], M_w_l, M_w_r
params ``p`` (12): see ``VehicleParams.as_array``

``F_in_x`` is only read in rolling mode, where it is the propulsive force along
the rolling direction of the contact frame.
"""

import numpy as np

from ._jit import njit
from .quaternion import cross, quat_mul, quat_normalize, rotation_matrix

MODE_QUADROTOR = 0
MODE_ROLLOCOPTER = 1
MODE_ROLLING = 2

P_MT, P_MW, P_ITX, P_ITY, P_ITZ, P_IBX, P_IBY, P_IBZ, P_IW, P_R, P_L, P_G = range(12)
STATE_SIZE = 15
INPUT_SIZE = 13


@njit
def _quat_rate(q, wx, wy, wz):
    half = np.empty(4)
    half[0] = 0.0
    half[1] = 0.5 * wx
    half[2] = 0.5 * wy
    half[3] = 0.5 * wz
    return quat_mul(q, half)


@njit
def _translational(x, u, p, mass):
    q = x[3:7]
    v = x[7:10]
    w = x[10:13]
    Rm = rotation_matrix(q)
    g = p[P_G]
    # body-frame gravity is the third row of R scaled by -g
    dv = np.empty(3)
    wxv = cross(w, v)
    dv[0] = u[5] / mass - g * Rm[2, 0] - wxv[0]
    dv[1] = u[6] / mass - g * Rm[2, 1] - wxv[1]
    dv[2] = (u[0] + u[7]) / mass - g * Rm[2, 2] - wxv[2]
    return Rm @ v, dv


@njit
def quadrotor_deriv(x, u, p):
    dx = np.zeros(STATE_SIZE)
    dr, dv = _translational(x, u, p, p[P_MT])
    dx[0:3] = dr
    w = x[10:13]
    dx[3:7] = _quat_rate(x[3:7], w[0], w[1], w[2])
    dx[7:10] = dv
    Ix, Iy, Iz = p[P_ITX], p[P_ITY], p[P_ITZ]
    gx = (Iz - Iy) * w[1] * w[2]
    gy = (Ix - Iz) * w[2] * w[0]
    gz = (Iy - Ix) * w[0] * w[1]
    dx[10] = (u[2] + u[8] - gx) / Ix
    dx[11] = (u[3] + u[9] - gy) / Iy
    dx[12] = (u[4] + u[10] - gz) / Iz
    return dx


@njit
def rollocopter_deriv(x, u, p):
    dx = np.zeros(STATE_SIZE)
    dr, dv = _translational(x, u, p, p[P_MT])
    dx[0:3] = dr
    w = x[10:13]
    dx[3:7] = _quat_rate(x[3:7], w[0], w[1], w[2])
    dx[7:10] = dv
    Ibx, Iby, Ibz = p[P_IBX], p[P_IBY], p[P_IBZ]
    Iw = p[P_IW]
    c = 2.0 * p[P_MW] * p[P_L] * p[P_L]
    gx = (Ibz - Iby) * w[1] * w[2]
    gy = (Ibx - Ibz) * w[2] * w[0]
    gz = (Iby - Ibx) * w[0] * w[1]
    rhs_x = u[2] + u[8] - gx - c * w[2] * w[1]
    rhs_y = u[3] + u[9] - gy
    rhs_z = u[4] + u[10] - gz + c * w[0] * w[1]
    dx[10] = rhs_x / (p[P_ITX] + c)
    dx[12] = rhs_z / (p[P_ITZ] + c)
    if Iw == 0.0:
        # massless wheels carry no torque: they keep their inertial spin
        dwy = rhs_y / p[P_ITY]
        dx[11] = dwy
        dx[13] = -dwy
        dx[14] = -dwy
    else:
        # the wheel rows give gamma_dot_i = M_w_i / I_w - omega_dot_y
        dwy = (rhs_y - u[11] - u[12]) / (p[P_ITY] - 2.0 * Iw)
        dx[11] = dwy
        dx[13] = u[11] / Iw - dwy
        dx[14] = u[12] / Iw - dwy
    return dx


@njit
def rolling_effective_mass(p):
    return p[P_MT] * p[P_R] / 2.0 + 2.0 * p[P_IW] / p[P_R]


@njit
def rolling_yaw_inertia(p):
    R, L = p[P_R], p[P_L]
    return R / (2.0 * L) * p[P_ITZ] + p[P_MW] * L * R + p[P_IW] * L / R


@njit
def rolling_deriv(x, u, p):
    """Constrained rolling dynamics in the level contact frame.

    Generalized speeds are the wheel rates and the chassis pitch rate; the
    forward speed and yaw rate follow from the no-slip constraint.
    """
    dx = np.zeros(STATE_SIZE)
    q = x[3:7]
    R, L, Iw = p[P_R], p[P_L], p[P_IW]
    Rm = rotation_matrix(q)
    dx[0:3] = Rm @ x[7:10]
    dx[3:7] = _quat_rate(q, 0.0, 0.0, x[12])
    A = (u[1] + u[5]) / rolling_effective_mass(p)
    Dd = (u[4] + u[10]) / rolling_yaw_inertia(p)
    B = u[3] + u[9]
    dwy = (B - Iw * A) / (p[P_ITY] - 2.0 * Iw)
    S = A - 2.0 * dwy
    dx[13] = 0.5 * (S - Dd)
    dx[14] = 0.5 * (S + Dd)
    dx[7] = 0.5 * R * A
    dx[11] = dwy
    dx[12] = R / (2.0 * L) * Dd
    return dx


@njit
def derivative(mode, x, u, p):
    if mode == MODE_QUADROTOR:
        return quadrotor_deriv(x, u, p)
    if mode == MODE_ROLLOCOPTER:
        return rollocopter_deriv(x, u, p)
    return rolling_deriv(x, u, p)


@njit
def project_rolling(x, p):
    """Snap a state onto the no-slip manifold (v_y = v_z = omega_x = 0)."""
    out = x.copy()
    R, L = p[P_R], p[P_L]
    gl, gr, wy = x[13], x[14], x[11]
    out[7] = 0.5 * R * (gr + gl + 2.0 * wy)
    out[8] = 0.0
    out[9] = 0.0
    out[10] = 0.0
    out[12] = R / (2.0 * L) * (gr - gl)
    return out


@njit
def rk4_step(mode, x, u, p, dt):
    k1 = derivative(mode, x, u, p)
    k2 = derivative(mode, x + 0.5 * dt * k1, u, p)
    k3 = derivative(mode, x + 0.5 * dt * k2, u, p)
    k4 = derivative(mode, x + dt * k3, u, p)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out[3:7] = quat_normalize(out[3:7])
    if mode == MODE_ROLLING:
        out = project_rolling(out, p)
    return out


@njit
def integrate(mode, x, u, p, dt, n):
    """``n`` RK4 steps under a constant input; used by tests and benchmarks."""
    out = x.copy()
    for _ in range(n):
        out = rk4_step(mode, out, u, p, dt)
    return out
