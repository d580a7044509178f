"""External wrench observers and collision detection.

Each observer channel is a first-order low-pass filter on a dynamics residual,

    y_dot = K * (p_dot + b - y),

where ``p`` is a generalized momentum (integrated exactly as a difference, so
no sensor signal is ever differentiated) and ``b`` collects the remaining
terms.  The pole is discretized exactly, ``y <- a*y + (1-a)*u`` with
``a = exp(-K*dt)``, and ``b`` enters through the trapezoidal average of its
endpoint samples.  A constant residual therefore reproduces the closed-form
step response ``1 - exp(-K*t)`` to rounding error.

Channel order everywhere is ``F_x, F_y, F_z, M_x, M_y, M_z, M_w_l, M_w_r``.
"""

from dataclasses import dataclass, field
from math import ceil
from typing import Optional

import numpy as np

from ._jit import njit
from ._kernels import rolling_effective_mass, rolling_yaw_inertia

N_CHANNELS = 8
FLYING, ROLLING = "flying", "rolling"

# W thresholds, in N^2: a 3 N equivalent with clean sensors, 6 N with noise
THRESHOLD_NOISELESS = 3.0 ** 2
THRESHOLD_NOISY = 6.0 ** 2
FLYING_WEIGHTS = (1.0, 0.0, 0.0)


@dataclass
class ImuSample:
    a: np.ndarray
    omega: np.ndarray
    t: float


@dataclass
class EncoderSample:
    gamma_l: float
    gamma_r: float
    gamma_dot_l: float = 0.0
    gamma_dot_r: float = 0.0
    t: float = 0.0


@dataclass
class ObserverMemory:
    """Integrator state: the last momentum/input samples and the running integrals.

    ``integral`` is the accumulated ``\\int (b - y) dt`` such that
    ``y = K * (p - p0 + integral)`` holds after every update.
    """

    mode: Optional[str] = None
    p_prev: np.ndarray = field(default_factory=lambda: np.zeros(N_CHANNELS))
    b_prev: np.ndarray = field(default_factory=lambda: np.zeros(N_CHANNELS))
    p0: np.ndarray = field(default_factory=lambda: np.zeros(N_CHANNELS))
    integral: np.ndarray = field(default_factory=lambda: np.zeros(N_CHANNELS))


@dataclass
class WrenchEstimate:
    F_e_hat: np.ndarray = field(default_factory=lambda: np.zeros(3))
    M_e_hat: np.ndarray = field(default_factory=lambda: np.zeros(3))
    M_w_hat_l: float = 0.0
    M_w_hat_r: float = 0.0
    integrator_state: ObserverMemory = field(default_factory=ObserverMemory)

    def as_vector(self):
        return np.concatenate([self.F_e_hat, self.M_e_hat, [self.M_w_hat_l, self.M_w_hat_r]])

    @classmethod
    def from_vector(cls, y, memory):
        return cls(y[0:3].copy(), y[3:6].copy(), float(y[6]), float(y[7]), memory)


@njit
def observer_step(y, p_prev, p_new, b_prev, b_new, gains, dt):
    """Advance every channel by one exactly-discretized first-order step."""
    out = np.empty_like(y)
    for i in range(y.shape[0]):
        a = np.exp(-gains[i] * dt)
        u = (p_new[i] - p_prev[i]) / dt + 0.5 * (b_prev[i] + b_new[i])
        out[i] = a * y[i] + (1.0 - a) * u
    return out


def _advance(est, mode, p_new, b_new, gains, dt, active):
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    mem = est.integrator_state
    y = est.as_vector()
    if mem.mode != mode:
        # (re)start: no momentum history, hold the input constant over the first step
        p_prev, b_prev, p0 = p_new, b_new, p_new - y / gains
    else:
        p_prev, b_prev, p0 = mem.p_prev, mem.b_prev, mem.p0
    y_new = observer_step(y, p_prev, p_new, b_prev, b_new, gains, dt)
    y_new = np.where(active, y_new, 0.0)
    integral = y_new / gains - (p_new - p0)
    memory = ObserverMemory(mode, p_new.copy(), b_new.copy(), p0.copy(), integral)
    return WrenchEstimate.from_vector(y_new, memory)


def _gains(p):
    return np.array([p.K_F] * 3 + [p.K_M] * 3 + [p.K_w] * 2)


def flying_channels(omega, a, u, p, enc=None, inertia=None):
    """Momentum and input terms of the flying-mode residuals.

    Without encoder data the wheel terms use ``m_w = I_w = 0``.  ``inertia``
    overrides the gyroscopic (body) inertia; the single-body form passes ``I_t``.
    """
    w = np.asarray(omega, dtype=float)
    if enc is None:
        m_w, I_w, g_l, g_r = 0.0, 0.0, 0.0, 0.0
    else:
        m_w, I_w, g_l, g_r = p.m_w, p.I_w, enc.gamma_l, enc.gamma_r
    I_b = p.I_b if inertia is None else inertia
    c = 2.0 * m_w * p.L ** 2
    mom = np.zeros(N_CHANNELS)
    mom[3] = (p.I_t[0] + c) * w[0]
    mom[4] = p.I_t[1] * w[1] + I_w * (g_l + g_r)
    mom[5] = (p.I_t[2] + c) * w[2]
    mom[6] = I_w * (w[1] + g_l)
    mom[7] = I_w * (w[1] + g_r)
    b = np.zeros(N_CHANNELS)
    b[0:3] = p.m_t * np.asarray(a, dtype=float)
    b[2] -= u.F_in_z
    b[3:6] = np.cross(w, I_b * w) - u.M_in
    b[3] += c * w[2] * w[1]
    b[5] -= c * w[0] * w[1]
    return mom, b


def update_flying(est, imu, enc, u, dt, p):
    mom, b = flying_channels(imu.omega, imu.a, u, p, enc)
    active = np.ones(N_CHANNELS, dtype=bool)
    return _advance(est, FLYING, mom, b, _gains(p), dt, active)


def update_quadrotor(est, imu, u, dt, p):
    """Single rigid body observer (mass ``m_t``, inertia ``I_t``), no wheel channels."""
    mom = np.zeros(N_CHANNELS)
    w = np.asarray(imu.omega, dtype=float)
    mom[3:6] = p.I_t * w
    b = np.zeros(N_CHANNELS)
    b[0:3] = p.m_t * np.asarray(imu.a, dtype=float) - np.array([0.0, 0.0, u.F_in_z])
    b[3:6] = np.cross(w, p.I_t * w) - u.M_in
    active = np.ones(N_CHANNELS, dtype=bool)
    return _advance(est, FLYING, mom, b, _gains(p), dt, active)


_ROLLING_ACTIVE = np.array([True, True, False, False, False, True, False, False])


def rolling_channels(enc, omega, u, p):
    pa = p.as_array()
    m_x = rolling_effective_mass(pa)
    J_z = rolling_yaw_inertia(pa)
    w_y = float(omega[1])
    s = enc.gamma_r + enc.gamma_l + 2.0 * w_y
    d = enc.gamma_r - enc.gamma_l
    mom = np.zeros(N_CHANNELS)
    mom[0] = m_x * s
    mom[5] = J_z * d
    b = np.zeros(N_CHANNELS)
    b[0] = -u.F_in_x
    b[1] = p.m_t * p.R ** 2 / (4.0 * p.L) * d * s
    b[5] = -u.M_in[2]
    return mom, b


def update_rolling(est, enc, omega, u, dt, p):
    """Rolling-mode observer: ``F_x``, ``F_y`` and ``M_z`` only; the rest is held at zero."""
    mom, b = rolling_channels(enc, omega, u, p)
    return _advance(est, ROLLING, mom, b, _gains(p), dt, _ROLLING_ACTIVE)


def default_weights(p):
    """Weights that give every term of W force-squared units."""
    return (1.0, 1.0 / p.L ** 2, 1.0 / p.R ** 2)


def collision_metric(est, weights):
    w_f, w_m, w_w = weights
    return float(w_f * est.F_e_hat @ est.F_e_hat
                 + w_m * est.M_e_hat @ est.M_e_hat
                 + w_w * (est.M_w_hat_l ** 2 + est.M_w_hat_r ** 2))


@dataclass
class ContactEvent:
    t: float
    F_e: np.ndarray
    W: float
    mode: str = FLYING

    def to_record(self):
        return {"t": self.t, "F_e": [float(x) for x in self.F_e], "W": self.W, "mode": self.mode}


class CollisionDetector:
    """Upward threshold crossings of W with a refractory window.

    ``sustain`` (off by default) re-emits an event when W has stayed above the
    threshold for that long since the last event.  Without it a body held
    against an obstacle never produces another crossing.
    """

    def __init__(self, threshold, refractory=0.3, sustain=None):
        if threshold <= 0.0:
            raise ValueError("threshold must be positive")
        if sustain is not None and sustain <= 0.0:
            raise ValueError("sustain must be positive")
        self.threshold = float(threshold)
        self.refractory = float(refractory)
        self.sustain = sustain
        self._prev_w = 0.0
        self._last_t = None
        self._above_since = None

    def update(self, t, W, F_e=None, mode=FLYING):
        crossed = self._prev_w < self.threshold <= W
        self._prev_w = W
        if W < self.threshold:
            self._above_since = None
        elif self._above_since is None:
            self._above_since = t
        if not crossed:
            if self.sustain is None or self._above_since is None:
                return None
            ref = self._above_since if self._last_t is None else max(self._last_t, self._above_since)
            if t - ref < self.sustain:
                return None
        elif self._last_t is not None and t - self._last_t < self.refractory:
            return None
        self._last_t = t
        F = np.zeros(3) if F_e is None else np.array(F_e, dtype=float)
        return ContactEvent(float(t), F, float(W), mode)


def detect_collision(samples, threshold, refractory=0.3):
    """Scan ``(t, W)`` or ``(t, W, F_e)`` samples and return every emitted event."""
    det = CollisionDetector(threshold, refractory)
    events = []
    for sample in samples:
        t, W = sample[0], sample[1]
        F = sample[2] if len(sample) > 2 else None
        ev = det.update(t, W, F)
        if ev is not None:
            events.append(ev)
    return events


def max_events(duration, refractory):
    return ceil(duration / refractory)
