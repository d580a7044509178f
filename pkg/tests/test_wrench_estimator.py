import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cio._jit import python_version
from cio.vehicle_model import ControlWrench, RigidState, step, Externals
from cio.wrench_estimator import (CollisionDetector, EncoderSample, ImuSample, WrenchEstimate, collision_metric,
                                  default_weights, detect_collision, max_events, observer_step, update_flying,
                                  update_quadrotor)


@pytest.mark.parametrize("K", [1.0, 10.0, 100.0])
def test_step_response_closed_form(K):
    dt = 1e-3
    y = np.zeros(1)
    for i in range(2000):
        y = observer_step(y, np.array([i * dt]), np.array([(i + 1) * dt]), np.zeros(1), np.zeros(1),
                          np.array([K]), dt)
        assert abs(y[0] - (1.0 - np.exp(-K * (i + 1) * dt))) < 1e-12


def test_step_response_at_one_time_constant():
    dt = 1e-3
    y = np.zeros(1)
    for i in range(100):
        y = observer_step(y, np.array([i * dt]), np.array([(i + 1) * dt]), np.zeros(1), np.zeros(1),
                          np.array([10.0]), dt)
    assert abs(y[0] - (1.0 - np.exp(-1.0))) < 1e-12


@given(st.floats(0.1, 200.0), st.floats(1e-4, 0.05), st.floats(-50, 50))
def test_constant_input_fixed_point(K, dt, f):
    y = np.array([f])
    out = observer_step(y, np.zeros(1), np.zeros(1), np.array([f]), np.array([f]), np.array([K]), dt)
    assert abs(out[0] - f) < 1e-9 * max(1.0, abs(f))


def test_compiled_observer_matches_python(rng):
    for _ in range(20):
        args = [rng.normal(size=8) for _ in range(5)]
        gains = rng.uniform(1, 100, size=8)
        a = observer_step(*args, gains, 0.005)
        b = python_version(observer_step)(*args, gains, 0.005)
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-14)


def test_observer_recovers_force_in_open_loop(params):
    # hover thrust plus a constant body-frame push; the observer must settle on the push
    F = np.array([1.5, -2.0, 0.5])
    M = np.array([0.02, -0.01, 0.03])
    s = RigidState(r=[0.0, 0.0, 5.0])
    u = ControlWrench(F_in_z=params.m_t * params.g)
    est = WrenchEstimate()
    dt = 1e-3
    for k in range(3000):
        s = step(s, u, Externals(F, M), dt, params)
        a = (np.array([0.0, 0.0, u.F_in_z]) + F) / params.m_t
        est = update_quadrotor(est, ImuSample(a, s.omega, (k + 1) * dt), u, dt, params)
    np.testing.assert_allclose(est.F_e_hat, F, atol=1e-9)
    np.testing.assert_allclose(est.M_e_hat, M, atol=1e-3)


def test_flying_and_quadrotor_observers_agree_without_wheels(params):
    p = params.without_wheels()
    rng = np.random.default_rng(5)
    e1 = e2 = WrenchEstimate()
    for k in range(500):
        imu = ImuSample(rng.normal(size=3) * 3, rng.normal(size=3), k * 0.005)
        enc = EncoderSample(*rng.normal(size=2), t=k * 0.005)
        u = ControlWrench(abs(rng.normal()) * 40, rng.normal(size=3))
        e1 = update_flying(e1, imu, enc, u, 0.005, p)
        e2 = update_quadrotor(e2, imu, u, 0.005, p)
        np.testing.assert_allclose(e1.as_vector(), e2.as_vector(), atol=1e-12)


def test_metric_weights(params):
    est = WrenchEstimate(np.array([3.0, 4.0, 0.0]), np.array([0.0, 0.0, 1.0]), 1.0, 0.0)
    assert collision_metric(est, (1.0, 0.0, 0.0)) == pytest.approx(25.0)
    w = default_weights(params)
    assert collision_metric(est, w) == pytest.approx(25.0 + 1 / params.L ** 2 + 1 / params.R ** 2)


def test_detector_threshold_and_refractory():
    samples = [(0.00, 0.0), (0.01, 10.0), (0.02, 0.0), (0.05, 10.0), (0.06, 0.0), (0.50, 10.0)]
    ev = detect_collision(samples, threshold=5.0, refractory=0.3)
    assert [e.t for e in ev] == [0.01, 0.50]


def test_detector_needs_upward_crossing():
    det = CollisionDetector(5.0, refractory=0.0)
    out = [det.update(t * 0.01, 10.0) for t in range(100)]
    assert sum(e is not None for e in out) == 1


def test_detector_sustain_reemits():
    det = CollisionDetector(5.0, refractory=0.3, sustain=0.5)
    out = [det.update(k * 0.01, 10.0) for k in range(151)]
    times = [e.t for e in out if e is not None]
    np.testing.assert_allclose(times, [0.0, 0.5, 1.0, 1.5])


@given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=400), st.floats(0.01, 1.0))
def test_event_count_bound(ws, refractory):
    dt = 0.005
    ev = detect_collision([(k * dt, w) for k, w in enumerate(ws)], 20.0, refractory)
    assert len(ev) <= max_events(len(ws) * dt, refractory) + 1
    gaps = np.diff([e.t for e in ev])
    assert np.all(gaps >= refractory - 1e-12)


def test_detector_rejects_bad_threshold():
    with pytest.raises(ValueError):
        CollisionDetector(0.0)


@given(st.floats(0.01, 100.0))
def test_metric_scales_quadratically(s):
    from cio.params import VehicleParams
    w = default_weights(VehicleParams.load())
    est = WrenchEstimate(np.array([1.0, -2.0, 0.5]), np.array([0.1, 0.2, -0.3]), 0.05, -0.02)
    scaled = WrenchEstimate(s * est.F_e_hat, s * est.M_e_hat, s * est.M_w_hat_l, s * est.M_w_hat_r)
    assert collision_metric(scaled, w) == pytest.approx(s * s * collision_metric(est, w), rel=1e-12)
