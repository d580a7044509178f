import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cio import _kernels as K
from cio._jit import python_version
from cio.errors import ConfigError, InfeasibleAllocation, NonFiniteState
from cio.params import VehicleParams
from cio.vehicle_model import (ControlWrench, Externals, RigidState, allocate_wrench, check_mass_matrix,
                               mechanical_energy, mix_rotor_speeds, quadrotor_derivative, rolling_state,
                               rollocopter_derivative, step)

from conftest import unit_quaternion


def _random_state(rng):
    return RigidState(rng.normal(size=3), unit_quaternion(rng), rng.normal(size=3), rng.normal(size=3),
                      *rng.normal(size=2))


def test_hover_is_equilibrium(params):
    s = RigidState(r=[0.0, 0.0, 1.0])
    u = ControlWrench(F_in_z=params.m_t * params.g)
    d = quadrotor_derivative(s, u, np.zeros(3), np.zeros(3), params)
    np.testing.assert_allclose(d.v_dot, 0.0, atol=1e-14)
    np.testing.assert_allclose(d.omega_dot, 0.0, atol=1e-14)


def test_free_fall(params):
    s = RigidState()
    d = quadrotor_derivative(s, ControlWrench(), np.zeros(3), np.zeros(3), params)
    np.testing.assert_allclose(d.v_dot, [0.0, 0.0, -params.g], atol=1e-14)


def test_external_force_in_body_frame(params):
    # 90 degree yaw: a body-x push accelerates along world y, reported in body x
    q = np.array([np.cos(np.pi / 4), 0.0, 0.0, np.sin(np.pi / 4)])
    s = RigidState(q=q)
    u = ControlWrench(F_in_z=params.m_t * params.g)
    d = quadrotor_derivative(s, u, np.array([params.m_t, 0.0, 0.0]), np.zeros(3), params)
    np.testing.assert_allclose(d.v_dot, [1.0, 0.0, 0.0], atol=1e-12)


def test_torque_free_energy_conserved(params):
    rng = np.random.default_rng(3)
    for mode in ("quadrotor", "rollocopter"):
        s = RigidState(r=[0.0, 0.0, 5.0], v=rng.normal(size=3), omega=rng.normal(size=3) * 2,
                       gamma_l=1.0, gamma_r=-2.0)
        e0 = mechanical_energy(s, params, mode)
        for _ in range(2000):
            s = step(s, ControlWrench(), None, 1e-3, params, mode)
        assert abs(mechanical_energy(s, params, mode) - e0) / e0 < 1e-6


def test_quaternion_stays_unit(params):
    s = RigidState(omega=[3.0, -2.0, 5.0])
    for _ in range(5000):
        s = step(s, ControlWrench(), None, 1e-3, params)
    assert abs(np.linalg.norm(s.q) - 1.0) < 1e-12


def test_massless_wheels_reduce_to_single_body(params):
    p = params.without_wheels()
    rng = np.random.default_rng(7)
    for _ in range(200):
        s = _random_state(rng)
        u = ControlWrench(F_in_z=abs(rng.normal()) * 40, M_in=rng.normal(size=3))
        F, M = rng.normal(size=3), rng.normal(size=3)
        a = rollocopter_derivative(s, u, F, M, 0.0, 0.0, p).to_vector()[:13]
        b = quadrotor_derivative(s, u, F, M, p).to_vector()[:13]
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_wheel_torque_spins_wheel(params):
    s = RigidState()
    d = rollocopter_derivative(s, ControlWrench(), np.zeros(3), np.zeros(3), 0.01, 0.0, params)
    assert d.gamma_dot_l > 0.0
    # reaction on the body pitch
    assert d.omega_dot[1] < 0.0


@given(st.floats(0.0, 60.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(-0.2, 0.2))
def test_allocation_roundtrip(thrust, mx, my, mz):
    p = VehicleParams.load()
    w = ControlWrench(F_in_z=thrust, M_in=[mx, my, mz])
    try:
        n = allocate_wrench(w, p)
    except InfeasibleAllocation:
        return
    back = mix_rotor_speeds(n, p)
    np.testing.assert_allclose(back.as_vector(), w.as_vector(), atol=1e-8)


def test_allocation_infeasible(params):
    with pytest.raises(InfeasibleAllocation):
        allocate_wrench(ControlWrench(F_in_z=0.0, M_in=[5.0, 0.0, 0.0]), params)


def test_rolling_step_keeps_constraint(params):
    s = rolling_state(4.0, 6.0, 0.0, params)
    u = ControlWrench(F_in_x=1.0, M_in=[0.0, 0.0, 0.05])
    for _ in range(1000):
        s = step(s, u, Externals(F_e=[-0.5, 0.0, 0.0]), 1e-3, params, mode="rolling")
        v_x = 0.5 * params.R * (s.gamma_l + s.gamma_r + 2 * s.omega[1])
        w_z = params.R / (2 * params.L) * (s.gamma_r - s.gamma_l)
        assert abs(s.v[0] - v_x) < 1e-8 and abs(s.omega[2] - w_z) < 1e-8
        assert abs(s.v[1]) < 1e-12 and abs(s.v[2]) < 1e-12


def test_non_finite_state_raises(params):
    s = RigidState(v=[np.nan, 0.0, 0.0])
    with pytest.raises(NonFiniteState):
        step(s, ControlWrench(), None, 1e-3, params)


def test_bad_dt(params):
    with pytest.raises(ValueError):
        step(RigidState(), ControlWrench(), None, 0.0, params)


def test_negative_thrust_rejected():
    with pytest.raises(ValueError):
        ControlWrench(F_in_z=-1.0)


def test_params_validation():
    with pytest.raises(ConfigError):
        VehicleParams(m_t=-1.0)
    with pytest.raises(ConfigError):
        VehicleParams.from_dict({"mass": 3.0})


def test_mass_matrix_ok(params):
    check_mass_matrix(params)
    check_mass_matrix(params.without_wheels())


def test_params_yaml_roundtrip(params, tmp_path):
    import yaml
    path = tmp_path / "v.yaml"
    path.write_text(yaml.safe_dump(params.to_dict()))
    q = VehicleParams.load(str(path))
    assert dataclasses.asdict(q).keys() == dataclasses.asdict(params).keys()
    np.testing.assert_array_equal(q.as_array(), params.as_array())


def test_compiled_kernels_match_python(params):
    rng = np.random.default_rng(11)
    pa = params.as_array()
    for code in (K.MODE_QUADROTOR, K.MODE_ROLLOCOPTER):
        for _ in range(20):
            x = _random_state(rng).to_vector()
            u = rng.normal(size=K.INPUT_SIZE)
            u[0] = abs(u[0]) * 40
            a = K.rk4_step(code, x, u, pa, 1e-3)
            b = python_version(K.rk4_step)(code, x, u, pa, 1e-3)
            np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-14)


def test_hover_holds_for_one_second(params):
    s0 = RigidState(r=[0.0, 0.0, 1.0])
    s = s0
    for _ in range(1000):
        s = step(s, ControlWrench(F_in_z=params.m_t * params.g), None, 1e-3, params)
    np.testing.assert_allclose(s.to_vector(), s0.to_vector(), atol=1e-9)


def test_free_fall_one_second(params):
    s = RigidState(r=[0.0, 0.0, 10.0])
    for _ in range(1000):
        s = step(s, ControlWrench(), None, 1e-3, params)
    assert s.v[2] == pytest.approx(-params.g, abs=1e-6)
    assert s.r[2] == pytest.approx(10.0 - 0.5 * params.g, abs=1e-6)


def test_yaw_torque_closed_form(params):
    # constant yaw moment from rest: psi = M t^2 / (2 I_z)
    Mz = 0.01
    s = RigidState()
    for _ in range(1000):
        s = step(s, ControlWrench(M_in=[0.0, 0.0, Mz]), None, 1e-3, params)
    psi = 2.0 * np.arctan2(s.q[3], s.q[0])
    assert psi == pytest.approx(Mz / (2.0 * params.I_t[2]), abs=1e-6)
