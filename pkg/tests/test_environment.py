import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cio import _kernels as K
from cio.config import EnvironmentSpec
from cio.environment import (Environment, build_environment, generate_maze, half_sine_weights, physics_substeps,
                             resolve_contacts)
from cio.errors import TunnelingDetected
from cio.vehicle_model import RigidState

WALL = np.array([[3.0, -5.0, 0.0, 3.1, 5.0, 3.0]])


@given(st.integers(1, 200))
def test_pulse_weights(n):
    w = half_sine_weights(n)
    assert abs(w.sum() - 1.0) < 1e-12 and np.all(w > 0)
    np.testing.assert_allclose(w, w[::-1], atol=1e-15)


def test_maze_is_perfect():
    """A perfect maze on n x n cells has n*n - 1 open passages."""
    n = 6
    boxes = generate_maze(n, 1.5, 0.1, 3.0, seed=3)
    interior = len(boxes) - 4
    assert interior == 2 * n * (n - 1) - (n * n - 1)
    np.testing.assert_array_equal(boxes, generate_maze(n, 1.5, 0.1, 3.0, seed=3))


def test_build_maze_bounds():
    env = build_environment(EnvironmentSpec(kind="maze", cells=4, corridor=2.0))
    assert env.bounds == (0.0, 8.0)


def test_wall_impact_removes_normal_velocity(params):
    env = Environment(WALL)
    s = RigidState(r=[2.72, 0.0, 1.0], v=[1.0, 0.5, 0.0])
    F, M, out = resolve_contacts(s, env, 1e-3, params)
    np.testing.assert_allclose(out.v, [0.0, 0.5, 0.0], atol=1e-12)
    np.testing.assert_allclose(F, [-params.m_t * 1.0 / 1e-3, 0.0, 0.0], atol=1e-9)
    np.testing.assert_array_equal(M, 0.0)


def test_restitution_and_separation(params):
    env = Environment(WALL, restitution=0.5)
    _, _, out = resolve_contacts(RigidState(r=[2.72, 0.0, 1.0], v=[1.0, 0.0, 0.0]), env, 1e-3, params)
    assert out.v[0] == pytest.approx(-0.5)
    # already separating: untouched
    _, _, out = resolve_contacts(RigidState(r=[2.72, 0.0, 1.0], v=[-1.0, 0.0, 0.0]), env, 1e-3, params)
    assert out.v[0] == -1.0


def test_friction_bounded_by_normal_impulse(params):
    env = Environment(WALL, friction=0.2)
    _, _, out = resolve_contacts(RigidState(r=[2.72, 0.0, 1.0], v=[1.0, 1.0, 0.0]), env, 1e-3, params)
    assert out.v[1] == pytest.approx(0.8)


def test_tunnelling_detected(params):
    with pytest.raises(TunnelingDetected):
        resolve_contacts(RigidState(r=[3.05, 0.0, 1.0]), Environment(WALL), 1e-3, params)


def test_pulse_delivers_the_impulse(params):
    """Flying into a wall: the scheduled pulse removes exactly the normal momentum."""
    pa = params.as_array()
    x = RigidState(r=[2.69, 0.0, 1.0], v=[1.0, 0.0, 0.0]).to_vector()
    u = np.zeros(K.INPUT_SIZE)
    u[0] = params.m_t * params.g
    ring = np.zeros((50, 3))
    x, pos, forces, impulses, hits, tunnel, _ = physics_substeps(
        K.MODE_QUADROTOR, x, u, pa, 1e-3, 200, ring, 0, half_sine_weights(50), WALL, False, 0.3, 0.0, 0.0, True)
    assert not tunnel
    assert abs(x[7]) < 1e-9
    total = forces.sum(axis=0) * 1e-3
    assert total[0] == pytest.approx(-params.m_t, rel=1e-9)
    # one impact: later steps see the scheduled momentum and add nothing
    assert np.count_nonzero(hits != -1) == 1


def test_deep_penetration_pushes_out(params):
    # 5 cm inside the obstacle margin: the contact adds a small separating velocity
    _, _, out = resolve_contacts(RigidState(r=[2.75, 0.0, 1.0], v=[0.0, 0.0, 0.0]), Environment(WALL), 1e-3,
                                 params)
    assert out.v[0] < 0.0
