"""Contact forces and contact points on the two wheels from the total external wrench.

Frame: wheel-centre coordinates with the left wheel at ``+L`` and the right
wheel at ``-L`` along body y.  A contact point is ``(p_x, 0, p_z)`` on the
circle of radius ``R``; ``theta`` parameterizes it as ``(R sin t, 0, -R cos t)``.

Wrench convention: ``F_e = f_l + f_r + m_t*g*e_z`` (the support forces plus the
configured weight), so the solver works with ``Ft = F_e_z - m_t*g``.

The side carrying the lateral force is chosen by ``sign(F_e_y)``: ``F_e_y < 0``
puts it on the left wheel, ``F_e_y >= 0`` on the right one.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ._jit import USE_NUMBA, njit
from .errors import DegenerateWrench, NoRealSolution

DISCRIMINANT_TOL = 1e-9
DEGENERATE_TOL = 1e-12
GRID_STEP = 1e-3
BRUTE_RESIDUAL_TOL = 1e-6


@dataclass
class TotalWrench:
    F_e: np.ndarray
    M_e: np.ndarray
    M_w_l: float
    M_w_r: float

    def __post_init__(self):
        self.F_e = np.array(self.F_e, dtype=float).reshape(3)
        self.M_e = np.array(self.M_e, dtype=float).reshape(3)
        self.M_w_l = float(self.M_w_l)
        self.M_w_r = float(self.M_w_r)
        if not (np.all(np.isfinite(self.F_e)) and np.all(np.isfinite(self.M_e))
                and np.isfinite(self.M_w_l) and np.isfinite(self.M_w_r)):
            raise ValueError("wrench must be finite")

    def to_record(self):
        return {"F_e": self.F_e.tolist(), "M_e": self.M_e.tolist(), "M_w_l": self.M_w_l, "M_w_r": self.M_w_r}

    @classmethod
    def from_record(cls, rec):
        return cls(rec["F_e"], rec["M_e"], rec["M_w_l"], rec["M_w_r"])


@dataclass
class ContactSolution:
    f_l: np.ndarray
    f_r: np.ndarray
    p_l: np.ndarray
    p_r: np.ndarray

    def to_record(self):
        return {k: getattr(self, k).tolist() for k in ("f_l", "f_r", "p_l", "p_r")}

    def as_vector(self):
        return np.concatenate([self.f_l, self.f_r, self.p_l, self.p_r])


def sgn(x):
    return 1.0 if x >= 0.0 else -1.0


def forward_wrench(sol, p):
    """Total wrench produced by the given per-wheel contacts."""
    fl, fr, pl, pr = sol.f_l, sol.f_r, sol.p_l, sol.p_r
    L = p.L
    M_w_l = pl[2] * fl[0] - pl[0] * fl[2]
    M_w_r = pr[2] * fr[0] - pr[0] * fr[2]
    M_e = np.array([
        L * (fl[2] - fr[2]) - pl[2] * fl[1] - pr[2] * fr[1],
        M_w_l + M_w_r,
        L * (fr[0] - fl[0]) + pl[0] * fl[1] + pr[0] * fr[1],
    ])
    F_e = fl + fr + np.array([0.0, 0.0, p.m_t * p.g])
    return TotalWrench(F_e, M_e, M_w_l, M_w_r)


def _circle_point(a, b, c, gx, gz, R):
    """Intersection of ``a p_x + b p_z + c = 0`` with the wheel circle.

    Of the two intersections, the signs ``sgn(gx)``, ``sgn(gz)`` of the wheel's
    force direction pick the one where that force pushes into the wheel.
    """
    n = a * a + b * b
    if n < DEGENERATE_TOL:
        raise DegenerateWrench(f"a^2 + b^2 = {n:.3e}")
    disc = R * R * n - c * c
    if disc / n < -DISCRIMINANT_TOL:
        raise NoRealSolution(f"normalized discriminant {disc / n:.3e}")
    root = np.sqrt(max(disc, 0.0))
    px = (-a * c - sgn(gx) * abs(b) * root) / n
    pz = (-b * c - sgn(gz) * abs(a) * root) / n
    return np.array([px, 0.0, pz])


def estimate_contact(w, p):
    """Closed-form contact solution for a total wrench."""
    L, R = p.L, p.R
    Fx, Fy, Fz = w.F_e
    Mx, _, Mz = w.M_e
    Ft = Fz - p.m_t * p.g
    if Fy < 0.0:
        # left wheel carries the lateral force
        a = Mx + L * Ft
        b = Mz - L * Fx
        c = 2.0 * L * w.M_w_l
        pl = _circle_point(a, b, c, -b, a, R)
        fl = np.array([(L * Fx - Mz + pl[0] * Fy) / (2.0 * L), Fy, (L * Ft + Mx + pl[2] * Fy) / (2.0 * L)])
        fr = np.array([Fx - fl[0], 0.0, Ft - fl[2]])
        pr = _circle_point(-fr[2], fr[0], -w.M_w_r, fr[0], fr[2], R)
    else:
        a = Mx - L * Ft
        b = Mz + L * Fx
        c = -2.0 * L * w.M_w_r
        pr = _circle_point(a, b, c, b, -a, R)
        fr = np.array([(L * Fx + Mz - pr[0] * Fy) / (2.0 * L), Fy, (L * Ft - Mx - pr[2] * Fy) / (2.0 * L)])
        fl = np.array([Fx - fr[0], 0.0, Ft - fr[2]])
        pl = _circle_point(-fl[2], fl[0], -w.M_w_l, fl[0], fl[2], R)
    return ContactSolution(fl, fr, pl, pr)


# --- brute-force oracle -------------------------------------------------------

@njit
def wrench_matrix(pl, pr, L):
    """Linear map from ``[f_l; f_r]`` to ``[F_e - m_t g e_z; M_e; M_w_l; M_w_r]``."""
    G = np.zeros((8, 6))
    for i in range(3):
        G[i, i] = 1.0
        G[i, 3 + i] = 1.0
    # M_x = L f_z^l - p_z^l f_y^l - L f_z^r - p_z^r f_y^r
    G[3, 2] = L
    G[3, 1] = -pl[2]
    G[3, 5] = -L
    G[3, 4] = -pr[2]
    # M_y = M_w_l + M_w_r
    G[4, 0] = pl[2]
    G[4, 2] = -pl[0]
    G[4, 3] = pr[2]
    G[4, 5] = -pr[0]
    # M_z = -L f_x^l + p_x^l f_y^l + L f_x^r + p_x^r f_y^r
    G[5, 0] = -L
    G[5, 1] = pl[0]
    G[5, 3] = L
    G[5, 4] = pr[0]
    G[6, 0] = pl[2]
    G[6, 2] = -pl[0]
    G[7, 3] = pr[2]
    G[7, 5] = -pr[0]
    return G


_SOLVE_ROWS = np.array([0, 1, 2, 3, 5])


@njit
def _first_wheel_scan(thetas, target, R, L, left_first):
    """Residual of the first wheel's moment row and its compressive test, per grid angle.

    The forces come from the F and M_x, M_z rows, which only involve the
    wheel that carries the lateral force.
    """
    n = thetas.shape[0]
    resid = np.empty(n)
    load = np.empty(n)
    rows = np.array([0, 1, 2, 3, 5])
    if left_first:
        cols = np.array([0, 1, 2, 3, 5])
        mw_row = 6
    else:
        cols = np.array([0, 2, 3, 4, 5])
        mw_row = 7
    dummy = np.zeros(3)
    for k in range(n):
        pt = np.array([R * np.sin(thetas[k]), 0.0, -R * np.cos(thetas[k])])
        if left_first:
            G = wrench_matrix(pt, dummy, L)
        else:
            G = wrench_matrix(dummy, pt, L)
        A = np.empty((5, 5))
        rhs = np.empty(5)
        for i in range(5):
            rhs[i] = target[rows[i]]
            for j in range(5):
                A[i, j] = G[rows[i], cols[j]]
        f5 = np.linalg.solve(A, rhs)
        f = np.zeros(6)
        for j in range(5):
            f[cols[j]] = f5[j]
        r = -target[mw_row]
        for j in range(6):
            r += G[mw_row, j] * f[j]
        resid[k] = r
        off = 0 if left_first else 3
        load[k] = (f[off] * pt[0] + f[off + 2] * pt[2]) / R
    return resid, load


def _first_wheel_scan_numpy(thetas, target, R, L, left_first):
    """Vectorized counterpart of ``_first_wheel_scan`` for the no-numba path."""
    n = thetas.shape[0]
    pts = np.stack([R * np.sin(thetas), np.zeros(n), -R * np.cos(thetas)], axis=1)
    zero = np.zeros(3)
    G = np.stack([wrench_matrix(pt, zero, L) if left_first else wrench_matrix(zero, pt, L) for pt in pts])
    cols = np.array([0, 1, 2, 3, 5]) if left_first else np.array([0, 2, 3, 4, 5])
    mw_row = 6 if left_first else 7
    A = G[:, _SOLVE_ROWS][:, :, cols]
    rhs = np.broadcast_to(target[_SOLVE_ROWS], (n, 5))
    f5 = np.linalg.solve(A, rhs[..., None])[..., 0]
    f = np.zeros((n, 6))
    f[:, cols] = f5
    resid = np.einsum("nj,nj->n", G[:, mw_row], f) - target[mw_row]
    off = 0 if left_first else 3
    load = (f[:, off] * pts[:, 0] + f[:, off + 2] * pts[:, 2]) / R
    return resid, load


def _scan(thetas, target, R, L, left_first):
    if USE_NUMBA:
        return _first_wheel_scan(thetas, target, R, L, left_first)
    return _first_wheel_scan_numpy(thetas, target, R, L, left_first)


def _grid_minimum(fun, thetas, resid, load):
    """Refine the grid point minimizing ``resid^2 + max(load, 0)^2`` to 1e-9."""
    obj = resid ** 2 + np.maximum(load, 0.0) ** 2
    k = int(np.argmin(obj))
    lo, hi = thetas[k] - GRID_STEP, thetas[k] + GRID_STEP
    r_lo, r_hi = fun(lo), fun(hi)
    if r_lo * r_hi < 0.0:
        return brentq(fun, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
    res = minimize_scalar(lambda t: fun(t) ** 2, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x)


def brute_force_contact(w, p):
    """Grid search over contact angles, independent of the closed form."""
    R, L = p.R, p.L
    target = np.concatenate([w.F_e - np.array([0.0, 0.0, p.m_t * p.g]), w.M_e, [w.M_w_l, w.M_w_r]])
    left_first = w.F_e[1] < 0.0
    thetas = np.arange(-np.pi, np.pi, GRID_STEP)

    def first_resid(t):
        r, _ = _first_wheel_scan(np.array([t]), target, R, L, left_first)
        return float(r[0])

    resid, load = _scan(thetas, target, R, L, left_first)
    t1 = _grid_minimum(first_resid, thetas, resid, load)
    _, forces = _first_forces(t1, target, R, L, left_first)
    p1 = _point(t1, R)
    f_first = forces[0:3] if left_first else forces[3:6]
    f_second = forces[3:6] if left_first else forces[0:3]
    mw_second = w.M_w_r if left_first else w.M_w_l

    def second_resid(t):
        pt = _point(t, R)
        return float(pt[2] * f_second[0] - pt[0] * f_second[2] - mw_second)

    pts = np.stack([R * np.sin(thetas), np.zeros_like(thetas), -R * np.cos(thetas)], axis=1)
    resid2 = pts[:, 2] * f_second[0] - pts[:, 0] * f_second[2] - mw_second
    load2 = (pts[:, 0] * f_second[0] + pts[:, 2] * f_second[2]) / R
    t2 = _grid_minimum(second_resid, thetas, resid2, load2)
    p2 = _point(t2, R)

    fl, fr = (f_first, f_second) if left_first else (f_second, f_first)
    pl, pr = (p1, p2) if left_first else (p2, p1)
    sol = ContactSolution(fl, fr, pl, pr)
    full = wrench_matrix(pl, pr, L) @ np.concatenate([fl, fr]) - target
    if np.max(np.abs(full)) > BRUTE_RESIDUAL_TOL:
        raise NoRealSolution(f"minimum constraint residual {np.max(np.abs(full)):.3e}")
    return sol


def _point(t, R):
    return np.array([R * np.sin(t), 0.0, -R * np.cos(t)])


def _first_forces(t, target, R, L, left_first):
    pt = _point(t, R)
    zero = np.zeros(3)
    G = wrench_matrix(pt, zero, L) if left_first else wrench_matrix(zero, pt, L)
    cols = np.array([0, 1, 2, 3, 5]) if left_first else np.array([0, 2, 3, 4, 5])
    f5 = np.linalg.solve(G[_SOLVE_ROWS][:, cols], target[_SOLVE_ROWS])
    f = np.zeros(6)
    f[cols] = f5
    return pt, f


# --- random feasible instances ------------------------------------------------

def random_contact(rng, p, theta_max=np.pi / 2 - 1e-3):
    """A physically consistent contact: compressive normal loads with bounded friction."""
    thetas = rng.uniform(-theta_max, theta_max, size=2)
    f = []
    pts = []
    for t in thetas:
        pt = _point(t, p.R)
        normal = -pt / p.R
        tangent = np.array([-normal[2], 0.0, normal[0]])
        load = rng.uniform(5.0, 40.0)
        f.append(load * normal + rng.uniform(-0.3, 0.3) * load * tangent)
        pts.append(pt)
    fl, fr = f
    if rng.random() < 0.5:
        fl[1] = -rng.uniform(0.05, 0.5) * np.linalg.norm(fl)
    else:
        fr[1] = rng.uniform(0.0, 0.5) * np.linalg.norm(fr)
    return ContactSolution(fl, fr, pts[0], pts[1])


# --- batch mode -----------------------------------------------------------------

def solve_batch(lines, p, solver=estimate_contact):
    """Solve one JSON-lines record per input line; failures become error records."""
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            w = TotalWrench.from_record(json.loads(line))
            rec = solver(w, p).to_record()
        except (NoRealSolution, DegenerateWrench) as exc:
            rec = {"error": type(exc).__name__, "message": str(exc)}
        except (KeyError, TypeError, ValueError) as exc:
            rec = {"error": "InvalidRecord", "message": str(exc)}
        rec["line"] = lineno
        yield rec
