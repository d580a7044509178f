import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cio.errors import ParallelDegenerate, ZeroForce
from cio.reactive_planner import (PlannerConfig, ReactivePlanner, cone_bounce, random_orthogonal_axis,
                                  specular_bounce, vertical_bounce_reference)

vec = arrays(np.float64, 3, elements=st.floats(-10.0, 10.0))
force = vec.filter(lambda f: np.linalg.norm(f) > 1e-2)
CFG = PlannerConfig()


def _angle(a, b):
    c = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    return np.arccos(np.clip(c, -1.0, 1.0))


@given(vec, force)
def test_specular_norm_and_involution(v, F):
    out = specular_bounce(v, F)
    assert abs(np.linalg.norm(out) - np.linalg.norm(v)) < 1e-12 * max(1.0, np.linalg.norm(v))
    np.testing.assert_allclose(specular_bounce(out, F), v, atol=1e-12 * max(1.0, np.linalg.norm(v)))


def test_specular_example():
    np.testing.assert_allclose(specular_bounce([1.0, 1.0, 0.0], [-2.0, 0.0, 0.0]), [-1.0, 1.0, 0.0])


@given(vec, force, st.floats(0.0, 1.5))
def test_cone_norm_and_angle(v, F, dpsi):
    if np.linalg.norm(np.cross(F / np.linalg.norm(F), v)) < 1e-6:
        return
    out = cone_bounce(v, F, dpsi, CFG)
    assert abs(np.linalg.norm(out) - CFG.v_nom) < 1e-9
    assert abs(_angle(out, F) - dpsi) < 1e-6


def test_cone_tilts_toward_previous_reference():
    out = cone_bounce([1.0, 0.5, 0.0], [-1.0, 0.0, 0.0], np.deg2rad(45), CFG)
    assert out[0] < 0 and out[1] > 0


def test_cone_parallel_raises():
    with pytest.raises(ParallelDegenerate):
        cone_bounce([1.0, 0.0, 0.0], [-3.0, 0.0, 0.0], 0.5, CFG)
    with pytest.raises(ZeroForce):
        cone_bounce([1.0, 0.0, 0.0], [0.0, 0.0, 0.0], 0.5, CFG)


@given(force, st.integers(0, 1000))
def test_random_axis_orthogonal(F, seed):
    f = F / np.linalg.norm(F)
    e = random_orthogonal_axis(np.random.default_rng(seed), f)
    assert abs(np.linalg.norm(e) - 1.0) < 1e-12 and abs(e @ f) < 1e-12


def test_head_on_collision_falls_back():
    planner = ReactivePlanner(PlannerConfig(rng_seed=3, planar=True))
    ref = planner.on_collision(1.0, [-5.0, 0.0, 0.0])
    assert abs(np.linalg.norm(ref.v_ref) - 1.0) < 1e-12
    assert 30 - 1e-9 <= np.rad2deg(_angle(ref.v_ref, np.array([-1.0, 0.0, 0.0]))) <= 60 + 1e-9
    assert ref.v_ref[2] == 0.0


def test_planar_ignores_vertical_force():
    planner = ReactivePlanner(PlannerConfig(rng_seed=1, planar=True, initial_direction=[1.0, 0.3, 0.0]))
    ref = planner.on_collision(0.5, [-5.0, 0.0, 3.0])
    assert ref.v_ref[2] == 0.0


def test_planner_is_deterministic():
    refs = []
    for _ in range(2):
        planner = ReactivePlanner(PlannerConfig(rng_seed=9))
        refs.append([planner.on_collision(t, [-1.0, 0.2 * t, 0.1]).v_ref for t in range(5)])
    np.testing.assert_array_equal(refs[0], refs[1])


def test_vertical_bounce_square_wave():
    cfg = PlannerConfig(bounce_period=2.0, bounce_amplitude=0.5)
    assert vertical_bounce_reference(0.2, cfg) == 0.5
    assert vertical_bounce_reference(1.2, cfg) == -0.5
    assert vertical_bounce_reference(2.2, cfg) == 0.5


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(v_nom=0.0)
    with pytest.raises(ValueError):
        PlannerConfig(dpsi_min=1.0, dpsi_max=0.5)


@given(vec, force, st.floats(0.0, 1.5))
def test_cone_coplanar(v, F, dpsi):
    if np.linalg.norm(np.cross(F / np.linalg.norm(F), v)) < 1e-6:
        return
    out = cone_bounce(v, F, dpsi, CFG)
    triple = np.dot(out, np.cross(F / np.linalg.norm(F), v / np.linalg.norm(v)))
    assert abs(triple) < 1e-9
