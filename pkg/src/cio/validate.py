"""Oracle-equivalence checks behind ``cio validate``.

Each check returns a ``Check`` with its worst residual and the tolerance it
was held to.  ``mutate=True`` injects a documented fault (the analytic contact
solver sees a wheel half-track 1% too large) so the suite can demonstrate
that it detects a wrong constant.
"""

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from .cio_filter import default_process_noise, initial_state, parallel_velocity, predict
from .contact_solver import brute_force_contact, estimate_contact, forward_wrench, random_contact
from .params import VehicleParams
from .quaternion import quat_exp, rodrigues, rotate, rotation_matrix
from .wrench_estimator import ImuSample, observer_step

MUTATION_SCALE = 1.01


@dataclass
class Check:
    name: str
    residual: float
    tol: float
    seconds: float = 0.0

    @property
    def passed(self):
        return bool(np.isfinite(self.residual) and self.residual < self.tol)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        chk = fn(*args, **kwargs)
        chk.seconds = time.perf_counter() - t0
        return chk
    wrapper.__name__ = fn.__name__
    return wrapper


@_timed
def check_contact_solver(n=100, seed=0, mutate=False):
    """Closed form vs grid search on random feasible contacts."""
    p = VehicleParams.load()
    p_analytic = dataclasses.replace(p, L=p.L * MUTATION_SCALE) if mutate else p
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        truth = random_contact(rng, p)
        w = forward_wrench(truth, p)
        a = estimate_contact(w, p_analytic).as_vector()
        b = brute_force_contact(w, p).as_vector()
        worst = max(worst, float(np.max(np.abs(a - b))))
    return Check("contact solver: analytic vs brute force", worst, 1e-6)


@_timed
def check_circle_constraint(n=1000, seed=1, mutate=False):
    p = VehicleParams.load()
    p_analytic = dataclasses.replace(p, L=p.L * MUTATION_SCALE) if mutate else p
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        sol = estimate_contact(forward_wrench(random_contact(rng, p), p), p_analytic)
        for pt in (sol.p_l, sol.p_r):
            worst = max(worst, abs(float(np.hypot(pt[0], pt[2]) - p.R)), abs(float(pt[1])))
    return Check("contact solver: wheel-circle residual", worst, 1e-9)


@_timed
def check_rotations(n=1000, seed=2):
    """Quaternion rotation vs the Rodrigues formula vs the rotation matrix."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(-np.pi, np.pi)
        v = rng.normal(size=3)
        q = quat_exp(axis * angle)
        r1 = rotate(q, v)
        r2 = rodrigues(v, axis, angle)
        r3 = rotation_matrix(q) @ v
        worst = max(worst, float(np.max(np.abs(r1 - r2))), float(np.max(np.abs(r1 - r3))))
    return Check("rotations: quaternion vs Rodrigues vs matrix", worst, 1e-12)


@_timed
def check_observer_step(gains=(1.0, 10.0, 100.0), dt=1e-3, t_end=0.5):
    """Constant-force step: the observer output follows 1 - exp(-K t)."""
    worst = 0.0
    for K in gains:
        y = np.zeros(1)
        k_vec = np.array([K])
        steps = int(round(t_end / dt))
        for i in range(steps):
            # unit force on a unit mass: momentum rises by dt per step, no modelled input
            y = observer_step(y, np.array([i * dt]), np.array([(i + 1) * dt]), np.zeros(1), np.zeros(1), k_vec, dt)
            expected = 1.0 - np.exp(-K * (i + 1) * dt)
            worst = max(worst, abs(float(y[0]) - expected))
    return Check("observer: step response vs 1 - exp(-K t)", worst, 1e-6)


@_timed
def check_bias_drift(bias=0.1, duration=10.0, dt=0.005):
    """Prediction under a constant accelerometer bias: velocity error equals bias * t."""
    fs = initial_state()
    Q = default_process_noise(dt)
    imu = ImuSample(np.array([bias, 0.0, 9.81]), np.zeros(3), 0.0)
    for _ in range(int(round(duration / dt))):
        fs = predict(fs, imu, Q, dt, 9.81)
    return Check("filter: bias drift vs bias * t", abs(float(fs.v_world()[0]) - bias * duration), 1e-9)


@_timed
def check_projection(n=10000, seed=3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        v = rng.normal(size=3) * 3.0
        F = rng.normal(size=3) * 10.0
        vp = parallel_velocity(v, F)
        scale = 10.0 ** rng.uniform(-3, 3)
        worst = max(worst,
                    abs(float(vp @ F)) / np.linalg.norm(F),
                    float(np.max(np.abs(parallel_velocity(vp, F) - vp))),
                    float(np.max(np.abs(parallel_velocity(v, scale * F) - vp))))
    return Check("filter: projection orthogonal, idempotent, scale-free", worst, 1e-9)


def run_all(mutate=False):
    return [
        check_contact_solver(mutate=mutate),
        check_circle_constraint(mutate=mutate),
        check_rotations(),
        check_observer_step(),
        check_bias_drift(),
        check_projection(),
    ]


def format_table(checks):
    width = max(len(c.name) for c in checks)
    lines = [f"{'check':<{width}}  {'max residual':>12}  {'tol':>8}  {'time':>7}  result"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {c.residual:12.3e}  {c.tol:8.0e}  {c.seconds:6.2f}s  "
                     f"{'PASS' if c.passed else 'FAIL'}")
    return "\n".join(lines)
