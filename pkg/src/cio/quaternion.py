"""Quaternion and rotation helpers.

Quaternions are Hamilton, scalar first ``[w, x, y, z]``.  ``rotation_matrix(q)``
maps body-frame vectors into the world frame, ``v_world = R(q) @ v_body``.
"""

import numpy as np

from ._jit import njit


@njit
def quat_mul(p, q):
    pw, px, py, pz = p[0], p[1], p[2], p[3]
    qw, qx, qy, qz = q[0], q[1], q[2], q[3]
    out = np.empty(4)
    out[0] = pw * qw - px * qx - py * qy - pz * qz
    out[1] = pw * qx + px * qw + py * qz - pz * qy
    out[2] = pw * qy - px * qz + py * qw + pz * qx
    out[3] = pw * qz + px * qy - py * qx + pz * qw
    return out


@njit
def quat_conj(q):
    out = np.empty(4)
    out[0] = q[0]
    out[1] = -q[1]
    out[2] = -q[2]
    out[3] = -q[3]
    return out


@njit
def quat_normalize(q):
    n = np.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q / n


@njit
def rotation_matrix(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3))
    R[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[0, 1] = 2.0 * (x * y - w * z)
    R[0, 2] = 2.0 * (x * z + w * y)
    R[1, 0] = 2.0 * (x * y + w * z)
    R[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[1, 2] = 2.0 * (y * z - w * x)
    R[2, 0] = 2.0 * (x * z - w * y)
    R[2, 1] = 2.0 * (y * z + w * x)
    R[2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


@njit
def rotate(q, v):
    """Body -> world."""
    return rotation_matrix(q) @ v


@njit
def rotate_inverse(q, v):
    """World -> body."""
    return rotation_matrix(q).T @ v


@njit
def quat_exp(phi):
    """Unit quaternion for the rotation vector ``phi`` (axis * angle)."""
    angle = np.sqrt(phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2])
    out = np.empty(4)
    if angle < 1e-12:
        # second-order series keeps the result unit-norm to machine precision
        out[0] = 1.0 - angle * angle / 8.0
        out[1] = 0.5 * phi[0]
        out[2] = 0.5 * phi[1]
        out[3] = 0.5 * phi[2]
        return quat_normalize(out)
    half = 0.5 * angle
    s = np.sin(half) / angle
    out[0] = np.cos(half)
    out[1] = s * phi[0]
    out[2] = s * phi[1]
    out[3] = s * phi[2]
    return out


@njit
def quat_log(q):
    """Rotation vector of a unit quaternion, taking the short way round."""
    w = q[0]
    v = q[1:4].copy()
    if w < 0.0:
        w = -w
        v = -v
    n = np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    if n < 1e-12:
        return 2.0 * v
    return 2.0 * np.arctan2(n, w) * v / n


@njit
def skew(v):
    S = np.zeros((3, 3))
    S[0, 1] = -v[2]
    S[0, 2] = v[1]
    S[1, 0] = v[2]
    S[1, 2] = -v[0]
    S[2, 0] = -v[1]
    S[2, 1] = v[0]
    return S


@njit
def cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


def quat_from_matrix(R):
    """Unit quaternion (w >= 0) from a proper rotation matrix (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    return quat_exp(axis / np.linalg.norm(axis) * float(angle))


def yaw_of(q):
    w, x, y, z = q
    return float(np.arctan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z)))


def rodrigues(v, axis, angle):
    """Rotate ``v`` about the unit ``axis`` by ``angle`` (right-hand rule).

    Full three-term form; the last term vanishes when ``v`` is orthogonal to the axis.
    """
    v = np.asarray(v, dtype=float)
    e = np.asarray(axis, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    return c * v + s * np.cross(e, v) + (1.0 - c) * np.dot(e, v) * e


IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])
