"""Closed-loop simulation: vehicle, contacts, sensors, observer, filters, planner and controller.

Loop schedule: dynamics at 1 kHz, IMU/encoders/observer/filters and the
attitude loop at 200 Hz, velocity loop at 50 Hz, planner on events.

A detected contact is acted on one pulse duration after detection, once the
contact pulse has fully passed through the accelerometer.  At that point the
CIO filter applies its velocity pseudo-measurement and the planner issues a
new reference.  Both use the force estimate sampled at the detection instant.
"""

import csv
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .cio_filter import (contact_update, default_process_noise, initial_state, measurement_covariance,
                         predict, velocity_trace)
from .environment import GROUND, build_environment, half_sine_weights, physics_substeps
from .errors import CIOError, SimulationError, TunnelingDetected
from .quaternion import quat_from_axis_angle, rotation_matrix
from .reactive_planner import PlannerConfig, ReactivePlanner, vertical_bounce_reference
from .vehicle_model import ROTOR_SPEED_MAX, ControlWrench, mixing_matrix, rolling_state
from .velocity_controller import (acceleration_to_attitude_thrust, attitude_rate_controller, height_hold,
                                  velocity_to_acceleration)
from .wrench_estimator import (FLYING, ROLLING, THRESHOLD_NOISELESS, THRESHOLD_NOISY, CollisionDetector,
                               EncoderSample, ImuSample, WrenchEstimate, collision_metric, update_flying,
                               update_rolling)

log = logging.getLogger("cio")

DT_PHYS = 1e-3
SUBSTEPS = 5
DT_SENSOR = DT_PHYS * SUBSTEPS
VELOCITY_DIVIDER = 4
IMPACT_GAP = 0.3

CSV_COLUMNS = [
    "t", "x", "y", "z", "vx", "vy", "vz",
    "vx_cio", "vy_cio", "vz_cio", "vx_pred", "vy_pred", "vz_pred",
    "err_cio", "err_pred", "Fx_hat", "Fy_hat", "Fz_hat", "W", "event",
    "vref_x", "vref_y", "vref_z",
]


# --- sensors ----------------------------------------------------------------------

@dataclass
class SensorNoise:
    """Per-sample white-noise standard deviations and a constant accelerometer bias."""

    accel_sigma: float = 0.05
    gyro_sigma: float = 0.001
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    encoder_sigma: float = 0.01
    seed: int = 0

    def __post_init__(self):
        self.accel_bias = np.array(self.accel_bias, dtype=float).reshape(3)
        if min(self.accel_sigma, self.gyro_sigma, self.encoder_sigma) < 0.0:
            raise ValueError("noise sigmas must be non-negative")

    @property
    def noiseless(self):
        return self.accel_sigma == 0.0 and self.gyro_sigma == 0.0 and self.encoder_sigma == 0.0


def imu_model(specific_force, omega, noise, rng, t=0.0):
    """Specific force with bias and white noise, and a noisy gyro sample."""
    a = np.asarray(specific_force, dtype=float) + noise.accel_bias + noise.accel_sigma * rng.standard_normal(3)
    w = np.asarray(omega, dtype=float) + noise.gyro_sigma * rng.standard_normal(3)
    return ImuSample(a, w, float(t))


class EncoderModel:
    """Noisy wheel rates; accelerations by first difference with a 2-sample moving average."""

    def __init__(self, noise, rng, dt):
        self.noise = noise
        self.rng = rng
        self.dt = dt
        self._prev = None
        self._prev_diff = np.zeros(2)

    def sample(self, gamma_l, gamma_r, t):
        g = np.array([gamma_l, gamma_r]) + self.noise.encoder_sigma * self.rng.standard_normal(2)
        diff = np.zeros(2) if self._prev is None else (g - self._prev) / self.dt
        g_dot = 0.5 * (diff + self._prev_diff)
        self._prev, self._prev_diff = g, diff
        return EncoderSample(float(g[0]), float(g[1]), float(g_dot[0]), float(g_dot[1]), float(t))


# --- run log -------------------------------------------------------------------------

def _f(x):
    return [float(v) for v in x]


@dataclass
class RunLog:
    """Typed records in time order plus summary metrics.

    Record types: ``tick`` (every sensor step), ``impact`` (physics ground
    truth), ``contact`` (detections), ``update`` (filter updates) and
    ``reference`` (planner decisions).
    """

    records: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    traces: list = field(default_factory=list)

    def add(self, kind, **fields):
        rec = {"type": kind}
        rec.update(fields)
        self.records.append(rec)

    def of_type(self, kind):
        return [r for r in self.records if r["type"] == kind]

    def jsonl_lines(self):
        return [json.dumps(r, sort_keys=False) for r in self.records]

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "run.jsonl"), "w") as fh:
            for line in self.jsonl_lines():
                fh.write(line + "\n")
        with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
            json.dump(self.metrics, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(os.path.join(out_dir, "traces.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in self.traces:
                writer.writerow([repr(v) for v in row])


# --- helpers -----------------------------------------------------------------------------

def _seeds(cfg):
    ss = np.random.SeedSequence([int(cfg.seed), int(cfg.planner.rng_seed)])
    noise_ss, planner_ss, enc_ss = ss.spawn(3)
    return (np.random.default_rng(noise_ss), int(planner_ss.generate_state(1, np.uint64)[0]),
            np.random.default_rng(enc_ss))


def _noise(cfg):
    n = cfg.noise
    return SensorNoise(n.accel_sigma, n.gyro_sigma, n.accel_bias, n.encoder_sigma, cfg.seed)


def _threshold(cfg, noise):
    if cfg.estimator.threshold > 0.0:
        return cfg.estimator.threshold
    return THRESHOLD_NOISELESS if noise.noiseless else THRESHOLD_NOISY


class _Allocator:
    """Pseudo-inverse allocation with rotor saturation; returns the realised wrench."""

    def __init__(self, p):
        self.M = mixing_matrix(p)
        self.pinv = np.linalg.pinv(self.M)

    def __call__(self, thrust, moment):
        n2 = np.clip(self.pinv @ np.array([thrust, *moment]), 0.0, ROTOR_SPEED_MAX ** 2)
        w = self.M @ n2
        return max(w[0], 0.0), w[1:4]


def _cell(pos, corridor):
    return int(np.floor(pos[0] / corridor)), int(np.floor(pos[1] / corridor))


# --- flight -----------------------------------------------------------------------------------

def _run_flying(cfg, clock):
    p = cfg.vehicle
    pa = p.as_array()
    env = build_environment(cfg.environment)
    noise = _noise(cfg)
    rng, planner_seed, enc_rng = _seeds(cfg)
    bouncing = cfg.mode == "bouncing"
    code = K.MODE_ROLLOCOPTER if p.has_wheels else K.MODE_QUADROTOR

    init = cfg.initial
    q0 = quat_from_axis_angle([0.0, 0.0, 1.0], init.yaw)
    R0 = rotation_matrix(q0)
    x = np.zeros(K.STATE_SIZE)
    x[0:3] = init.position
    x[3:7] = q0
    x[7:10] = R0.T @ np.asarray(init.velocity, dtype=float)

    fc = cfg.filter
    Q = default_process_noise(DT_SENSOR, fc.accel_var_rate, fc.gyro_sigma, fc.pos_var_rate)
    P0 = np.zeros((12, 12))
    P0[6:9, 6:9] = fc.p0_velocity * np.eye(3)
    fs = initial_state(x[0:3], q0, x[7:10], P0)
    shadow = fs.copy()

    planner_cfg = cfg.planner
    planner_cfg = type(planner_cfg)(**{**planner_cfg.__dict__, "rng_seed": planner_seed, "planar": not bouncing})
    planner = ReactivePlanner(planner_cfg)
    detector = CollisionDetector(_threshold(cfg, noise), cfg.estimator.refractory, cfg.estimator.sustain or None)
    weights = tuple(cfg.estimator.weights)
    encoders = EncoderModel(noise, enc_rng, DT_SENSOR)
    alloc = _Allocator(p)
    gains = cfg.controller
    z_ref = float(init.position[2])

    n_pulse = max(1, int(round(cfg.environment.pulse_duration / DT_PHYS)))
    ring = np.zeros((n_pulse, 3))
    pos = 0
    pulse_w = half_sine_weights(n_pulse)
    u = np.zeros(K.INPUT_SIZE)
    u[5:8] = cfg.external_force
    est = WrenchEstimate()
    runlog = RunLog()
    runlog.add("reference", **planner.current.to_record())

    n_ticks = int(round(cfg.duration / DT_SENSOR))
    thrust, q_des = p.m_t * p.g, q0.copy()
    v_ref = planner.current.v_ref.copy()
    pending = []
    last_impact = {}
    updates, events, impacts = [], [], []
    err_cio_max = err_pred_max = 0.0
    t_pred_2 = None
    start_cell = _cell(x[0:3], cfg.environment.corridor)
    exited = False
    R_k_default = measurement_covariance(sigma=fc.r_sigma)

    for k in range(n_ticks):
        t0 = k * DT_SENSOR
        t = (k + 1) * DT_SENSOR
        clock[0] = t0
        Rm = rotation_matrix(x[3:7])
        v_true = Rm @ x[7:10]
        v_cio = fs.v_world()

        if k % VELOCITY_DIVIDER == 0:
            v_fb = v_cio if cfg.feedback == "estimate" else v_true
            if bouncing:
                v_ref = np.array([0.0, 0.0, vertical_bounce_reference(t0, planner_cfg) + cfg.bounce.offset])
            else:
                v_ref = planner.current.v_ref.copy()
                if cfg.hold_height:
                    v_ref[2] = height_hold(x[2], z_ref, gains)
            a_des = velocity_to_acceleration(v_ref, v_fb, gains, p.g)
            thrust, q_des = acceleration_to_attitude_thrust(a_des, gains.yaw_ref, p)

        m_cmd = attitude_rate_controller(q_des, x[3:7], x[10:13], gains)
        F_in_z, M_in = alloc(thrust, m_cmd)
        u[0] = F_in_z
        u[2:5] = M_in

        x, pos, forces, impulses, hits, tunnel, _ = physics_substeps(
            code, x, u, pa, DT_PHYS, SUBSTEPS, ring, pos, pulse_w, env.boxes, env.ground, env.radius,
            env.restitution, env.friction, True)
        if tunnel:
            raise TunnelingDetected(f"vehicle centre entered an obstacle at r={_f(x[0:3])}")
        if not np.all(np.isfinite(x)):
            raise CIOError("non-finite vehicle state")
        for j in np.nonzero(hits != -1)[0]:
            obst = int(hits[j])
            tj = t0 + (j + 1) * DT_PHYS
            if tj - last_impact.get(obst, -np.inf) > IMPACT_GAP:
                J = impulses[j]
                rec = {"t": tj, "J": _f(J), "obstacle": "ground" if obst == GROUND else obst}
                impacts.append(rec)
                runlog.add("impact", **rec)
            last_impact[obst] = tj

        # sensors
        f_body = (np.array([0.0, 0.0, F_in_z]) + u[5:8] + forces.mean(axis=0)) / p.m_t
        imu = imu_model(f_body, x[10:13], noise, rng, t)
        enc = encoders.sample(x[13], x[14], t)
        ucw = ControlWrench(F_in_z=F_in_z, M_in=M_in)
        est = update_flying(est, imu, enc, ucw, DT_SENSOR, p)
        W = collision_metric(est, weights)
        ev = detector.update(t, W, est.F_e_hat, FLYING)

        fs = predict(fs, imu, Q, DT_SENSOR, p.g)
        if cfg.comparison:
            shadow = predict(shadow, imu, Q, DT_SENSOR, p.g)

        if ev is not None:
            F_world = rotation_matrix(fs.q) @ ev.F_e
            F_world_true = rotation_matrix(x[3:7]) @ ev.F_e
            rec = ev.to_record()
            rec.update(F_world=_f(F_world), F_world_true_att=_f(F_world_true))
            events.append(rec)
            runlog.add("contact", **rec)
            pending.append((t + cfg.environment.pulse_duration - 1e-12, F_world, ev.t))

        while pending and pending[0][0] <= t:
            _, F_world, t_event = pending.pop(0)
            fs = _respond(cfg, fs, planner, F_world, t, t_event, x, runlog, updates, R_k_default, bouncing)

        v_true = rotation_matrix(x[3:7]) @ x[7:10]
        v_cio = fs.v_world()
        v_pred = shadow.v_world() if cfg.comparison else v_cio
        e_cio = float(np.linalg.norm(v_cio - v_true))
        e_pred = float(np.linalg.norm(v_pred - v_true))
        err_cio_max = max(err_cio_max, e_cio)
        err_pred_max = max(err_pred_max, e_pred)
        if t_pred_2 is None and e_pred > 2.0:
            t_pred_2 = t
        if cfg.environment.kind == "maze" and _cell(x[0:3], cfg.environment.corridor) != start_cell:
            exited = True

        if cfg.record_ticks:
            runlog.add("tick", t=t, r=_f(x[0:3]), v=_f(v_true), v_cio=_f(v_cio), v_pred=_f(v_pred),
                       F_hat=_f(est.F_e_hat), M_hat=_f(est.M_e_hat), M_w=[est.M_w_hat_l, est.M_w_hat_r],
                       W=W, event=ev is not None, P_vv=velocity_trace(fs), v_ref=_f(v_ref),
                       thrust=float(F_in_z), M_in=_f(M_in))
            runlog.traces.append([t, *x[0:3], *v_true, *v_cio, *v_pred, e_cio, e_pred, *est.F_e_hat, W,
                                  int(ev is not None), *v_ref])

    # detections whose response time falls after the end of the run
    t_end = n_ticks * DT_SENSOR
    for _, F_world, t_event in pending:
        fs = _respond(cfg, fs, planner, F_world, t_end, t_event, x, runlog, updates, R_k_default, bouncing)

    drops = [u_["trace_after"] < u_["trace_before"] for u_ in updates]
    improved = [u_["err_z_after"] < u_["err_z_before"] for u_ in updates]
    runlog.metrics = {
        "name": cfg.name,
        "mode": cfg.mode,
        "seed": int(cfg.seed),
        "duration": float(t_end),
        "cio": bool(cfg.cio),
        "n_impacts": len(impacts),
        "n_events": len(events),
        "n_updates": len(updates),
        "max_err_cio": err_cio_max,
        "max_err_pred": err_pred_max if cfg.comparison else None,
        "t_pred_exceeds_2": t_pred_2,
        "trace_decreased_all": bool(all(drops)) if drops else None,
        "bounce_improved_fraction": float(np.mean(improved)) if improved and bouncing else None,
        "exited_start_cell": exited if cfg.environment.kind == "maze" else None,
        "final_position": _f(x[0:3]),
        "final_velocity": _f(rotation_matrix(x[3:7]) @ x[7:10]),
    }
    return runlog


def _respond(cfg, fs, planner, F_world, t, t_event, x, runlog, updates, R_k_default, bouncing):
    """Planner decision and CIO update for one detected contact."""
    if not bouncing:
        ref = planner.on_collision(t, F_world)
        if ref is not None:
            runlog.add("reference", **ref.to_record())
    if not cfg.cio:
        return fs
    v_true = rotation_matrix(x[3:7]) @ x[7:10]
    F_body = rotation_matrix(fs.q).T @ F_world
    R_k = measurement_covariance(F_body, cfg.filter.r_sigma, True) if cfg.filter.anisotropic else R_k_default
    before = fs.v_world() - v_true
    tr_before = velocity_trace(fs)
    fs = contact_update(fs, F_body, R_k)
    after = fs.v_world() - v_true
    rec = {
        "t": t, "t_event": t_event, "F_world": _f(F_world),
        "trace_before": tr_before, "trace_after": velocity_trace(fs),
        "err_before": float(np.linalg.norm(before)), "err_after": float(np.linalg.norm(after)),
        "err_z_before": abs(float(before[2])), "err_z_after": abs(float(after[2])),
    }
    n = F_world / np.linalg.norm(F_world)
    rec["err_normal_before"] = abs(float(before @ n))
    rec["err_normal_after"] = abs(float(after @ n))
    updates.append(rec)
    runlog.add("update", **rec)
    return fs


# --- rolling ---------------------------------------------------------------------------------

def _run_rolling(cfg, clock):
    p = cfg.vehicle
    pa = p.as_array()
    rc = cfg.rolling
    noise = _noise(cfg)
    rng, _, enc_rng = _seeds(cfg)
    s0 = rolling_state(0.0, 0.0, 0.0, p, r=(cfg.initial.position[0], cfg.initial.position[1], p.R),
                       yaw=cfg.initial.yaw)
    x = s0.to_vector()
    m_x = K.rolling_effective_mass(pa)
    J_z = K.rolling_yaw_inertia(pa)
    u = np.zeros(K.INPUT_SIZE)
    u[5:8] = rc.resistance
    ring = np.zeros((1, 3))
    weights = np.ones(1)
    boxes = np.zeros((0, 6))
    est = WrenchEstimate()
    encoders = EncoderModel(noise, enc_rng, DT_SENSOR)
    runlog = RunLog()
    n_ticks = int(round(cfg.duration / DT_SENSOR))
    resid_max = 0.0
    fx_tail = []
    tail_start = max(0.0, cfg.duration - 10.0)

    for k in range(n_ticks):
        t0 = k * DT_SENSOR
        t = (k + 1) * DT_SENSOR
        clock[0] = t0
        yaw_rate = rc.yaw_rate if int(t0 // rc.half_period) % 2 == 0 else -rc.yaw_rate
        F_in_x = rc.kp_speed * m_x * (rc.speed - x[7])
        M_in = np.array([0.0, -rc.kd_pitch * x[11], rc.kp_yaw * J_z * (yaw_rate - x[12])])
        u[1] = F_in_x
        u[2:5] = M_in
        x, _, _, _, _, _, resid = physics_substeps(K.MODE_ROLLING, x, u, pa, DT_PHYS, SUBSTEPS, ring, 0, weights,
                                                   boxes, False, 1.0, 0.0, 0.0, False)
        resid_max = max(resid_max, resid)
        omega = x[10:13] + noise.gyro_sigma * rng.standard_normal(3)
        enc = encoders.sample(x[13], x[14], t)
        est = update_rolling(est, enc, omega, ControlWrench(F_in_x=F_in_x, M_in=M_in), DT_SENSOR, p)
        if t > tail_start:
            fx_tail.append(est.F_e_hat[0])
        if cfg.record_ticks:
            runlog.add("tick", t=t, r=_f(x[0:3]), v=_f(x[7:10]), omega=_f(x[10:13]),
                       gamma=[float(x[13]), float(x[14])], F_hat=_f(est.F_e_hat), M_hat=_f(est.M_e_hat),
                       residual=float(resid), F_in_x=float(F_in_x), M_in=_f(M_in))
    runlog.metrics = {
        "name": cfg.name,
        "mode": cfg.mode,
        "seed": int(cfg.seed),
        "duration": n_ticks * DT_SENSOR,
        "max_constraint_residual": resid_max,
        "mean_Fx_hat_tail": float(np.mean(fx_tail)) if fx_tail else None,
        "injected_Fx": float(rc.resistance[0]),
        "final_position": _f(x[0:3]),
    }
    return runlog


def run_scenario(cfg):
    """Run one scenario; module errors are re-raised as ``SimulationError`` with the sim time."""
    log.info("running %s (mode=%s, seed=%d, %.1fs)", cfg.name, cfg.mode, cfg.seed, cfg.duration)
    clock = [0.0]
    try:
        if cfg.mode == ROLLING:
            return _run_rolling(cfg, clock)
        return _run_flying(cfg, clock)
    except CIOError as exc:
        raise SimulationError(clock[0], exc) from exc


# --- single-wall trials ------------------------------------------------------------------

def wall_trial_config(angle_deg, seed, speed=1.0, standoff=0.6):
    """Flight into the wall at x = 3 with the approach ``angle_deg`` off the wall normal."""
    from .config import EnvironmentSpec, InitialSpec, ScenarioConfig
    a = np.deg2rad(angle_deg)
    d = np.array([np.cos(a), np.sin(a), 0.0])
    wall_x, radius = 3.0, 0.3
    start = np.array([wall_x - radius - standoff, -standoff * np.tan(a), 1.0])
    duration = standoff / (speed * np.cos(a)) + 0.3
    planner = PlannerConfig(v_nom=speed, initial_direction=d)
    return ScenarioConfig(name=f"wall{angle_deg:g}", duration=duration, seed=int(seed), comparison=False,
                          feedback="truth", record_ticks=False,
                          environment=EnvironmentSpec(kind="corridor", wall_x=wall_x, radius=radius),
                          initial=InitialSpec(position=start.tolist(), velocity=(speed * d).tolist()),
                          planner=planner)


def wall_trial(angle_deg, seed, speed=1.0):
    """Angle (rad) between the first detected force direction and the true impulse, or None if undetected."""
    runlog = run_scenario(wall_trial_config(angle_deg, seed, speed))
    impacts = [r for r in runlog.of_type("impact") if r["obstacle"] != "ground"]
    contacts = runlog.of_type("contact")
    if not impacts or not contacts:
        return None
    J = np.asarray(impacts[0]["J"])
    F = np.asarray(contacts[0]["F_world"])
    c = F @ J / (np.linalg.norm(F) * np.linalg.norm(J))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))
