"""World geometry and rigid contact physics.

The vehicle's collision shape is a sphere around the centre of mass, so
contact forces pass through the CoM and produce no moment.  A contact removes
the approaching normal velocity (scaled by ``1 + restitution``).  In the
simulator the resulting impulse is spread over a half-sine force pulse of
``pulse_duration`` seconds.  The dynamics and the accelerometer see the same
force history.
"""

from dataclasses import dataclass, field

import numpy as np

from ._jit import njit
from ._kernels import MODE_ROLLING, P_L, P_MT, P_R, rk4_step
from .errors import TunnelingDetected
from .quaternion import rotation_matrix

GROUND = -2  # obstacle index reported for ground contacts
PENETRATION_SLOP = 0.03
PENETRATION_TIME = 0.1
VELOCITY_TOL = 1e-12  # approach speeds below this are round-off from earlier impulses


@dataclass
class Environment:
    """Axis-aligned boxes ``[xmin, ymin, zmin, xmax, ymax, zmax]`` plus an optional ground plane at z = 0."""

    boxes: np.ndarray = field(default_factory=lambda: np.zeros((0, 6)))
    ground: bool = True
    restitution: float = 0.0
    friction: float = 0.0
    radius: float = 0.3
    bounds: tuple = None

    def __post_init__(self):
        self.boxes = np.array(self.boxes, dtype=float).reshape(-1, 6)
        if np.any(self.boxes[:, 3:] <= self.boxes[:, :3]):
            raise ValueError("obstacles must have positive extents")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError("restitution must lie in [0, 1]")
        if self.friction < 0.0 or self.radius <= 0.0:
            raise ValueError("friction must be >= 0 and radius > 0")


def wall_box(x0, y0, x1, y1, thickness, height):
    """Thin box along the segment (x0, y0)-(x1, y1); the segment must be axis-aligned."""
    h = 0.5 * thickness
    return [min(x0, x1) - h, min(y0, y1) - h, 0.0, max(x0, x1) + h, max(y0, y1) + h, height]


def generate_maze(cells, corridor, thickness, height, seed):
    """Perfect maze on a ``cells`` x ``cells`` grid by randomized depth-first search.

    Returns the wall boxes; cell (i, j) spans ``[i*c, (i+1)*c] x [j*c, (j+1)*c]``.
    """
    rng = np.random.default_rng(seed)
    n = cells
    # walls[i, j, 0]: east wall of cell (i, j); walls[i, j, 1]: north wall
    east = np.ones((n, n), dtype=bool)
    north = np.ones((n, n), dtype=bool)
    seen = np.zeros((n, n), dtype=bool)
    stack = [(0, 0)]
    seen[0, 0] = True
    while stack:
        i, j = stack[-1]
        options = [(di, dj) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))
                   if 0 <= i + di < n and 0 <= j + dj < n and not seen[i + di, j + dj]]
        if not options:
            stack.pop()
            continue
        di, dj = options[rng.integers(len(options))]
        if di == 1:
            east[i, j] = False
        elif di == -1:
            east[i - 1, j] = False
        elif dj == 1:
            north[i, j] = False
        else:
            north[i, j - 1] = False
        seen[i + di, j + dj] = True
        stack.append((i + di, j + dj))

    c = corridor
    size = n * c
    boxes = [
        wall_box(0, 0, size, 0, thickness, height),
        wall_box(0, size, size, size, thickness, height),
        wall_box(0, 0, 0, size, thickness, height),
        wall_box(size, 0, size, size, thickness, height),
    ]
    for i in range(n):
        for j in range(n):
            if east[i, j] and i < n - 1:
                boxes.append(wall_box((i + 1) * c, j * c, (i + 1) * c, (j + 1) * c, thickness, height))
            if north[i, j] and j < n - 1:
                boxes.append(wall_box(i * c, (j + 1) * c, (i + 1) * c, (j + 1) * c, thickness, height))
    return np.array(boxes)


def build_environment(spec):
    """Environment from an ``EnvironmentSpec``."""
    boxes = [list(b) for b in spec.walls]
    bounds = None
    if spec.kind == "maze":
        maze = generate_maze(spec.cells, spec.corridor, spec.wall_thickness, spec.wall_height, spec.maze_seed)
        boxes.extend(maze.tolist())
        bounds = (0.0, spec.cells * spec.corridor)
    elif spec.kind == "corridor":
        boxes.append([spec.wall_x, -5.0, 0.0, spec.wall_x + spec.wall_thickness, 5.0, spec.wall_height])
    return Environment(np.array(boxes, dtype=float).reshape(-1, 6), spec.ground, spec.restitution,
                       spec.friction, spec.radius, bounds)


@njit
def half_sine_weights(n):
    """Per-step weights of a half-sine pulse over ``n`` steps, summing to one."""
    w = np.empty(n)
    for i in range(n):
        w[i] = np.sin(np.pi * (i + 0.5) / n)
    return w / w.sum()


@njit
def _contact_impulse(vw, normal, mass, restitution, friction, bias):
    """Impulse removing the approaching normal velocity; zero when separating.

    ``bias`` is a small separating velocity that pushes a deeply penetrated
    body back out (sustained pushing would otherwise sink it into the obstacle).
    """
    vn = vw[0] * normal[0] + vw[1] * normal[1] + vw[2] * normal[2]
    J = np.zeros(3)
    if vn >= bias - VELOCITY_TOL:
        return J
    dvn = max(-(1.0 + restitution) * vn, bias - vn)
    J += mass * dvn * normal
    if friction > 0.0:
        vt = vw - vn * normal
        nt = np.sqrt(vt[0] ** 2 + vt[1] ** 2 + vt[2] ** 2)
        if nt > 0.0:
            dvt = min(nt, friction * dvn)
            J -= mass * dvt * vt / nt
    return J


@njit
def _contacts(c, vw, boxes, ground, radius, mass, restitution, friction):
    """Total contact impulse at centre ``c`` moving with world velocity ``vw``.

    Returns (impulse, obstacle index or -1, tunnelled flag).
    """
    J = np.zeros(3)
    hit = -1
    tunnel = False
    v = vw.copy()
    for i in range(boxes.shape[0]):
        d = np.empty(3)
        for a in range(3):
            cp = min(max(c[a], boxes[i, a]), boxes[i, 3 + a])
            d[a] = c[a] - cp
        dist = np.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
        if dist >= radius:
            continue
        if dist < 1e-12:
            tunnel = True
            continue
        bias = max(radius - dist - PENETRATION_SLOP, 0.0) / PENETRATION_TIME
        Ji = _contact_impulse(v, d / dist, mass, restitution, friction, bias)
        if Ji[0] != 0.0 or Ji[1] != 0.0 or Ji[2] != 0.0:
            J += Ji
            v += Ji / mass
            hit = i
    if ground and c[2] < radius:
        if c[2] <= 0.0:
            tunnel = True
        bias = max(radius - c[2] - PENETRATION_SLOP, 0.0) / PENETRATION_TIME
        Jg = _contact_impulse(v, np.array([0.0, 0.0, 1.0]), mass, restitution, friction, bias)
        if Jg[0] != 0.0 or Jg[1] != 0.0 or Jg[2] != 0.0:
            J += Jg
            hit = GROUND
    return J, hit, tunnel


def resolve_contacts(s, env, dt, p):
    """Instantaneous impulse resolution on a state.

    Returns the contact force ``J/dt`` (world frame), the contact moment (zero:
    the force acts through the CoM) and the post-impact state.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    Rm = rotation_matrix(s.q)
    vw = Rm @ s.v
    J, _, tunnel = _contacts(s.r, vw, env.boxes, env.ground, env.radius, p.m_t, env.restitution, env.friction)
    if tunnel:
        raise TunnelingDetected(f"centre {s.r} inside an obstacle")
    out = s.copy()
    out.v = Rm.T @ (vw + J / p.m_t)
    return J / dt, np.zeros(3), out


@njit
def rolling_residual(x, p):
    """Largest violation of the no-slip constraint for a rolling-mode state."""
    R, L = p[P_R], p[P_L]
    r1 = abs(x[7] - 0.5 * R * (x[14] + x[13] + 2.0 * x[11]))
    r2 = abs(x[12] - R / (2.0 * L) * (x[14] - x[13]))
    return max(r1, r2, abs(x[8]), abs(x[9]), abs(x[10]))


@njit
def physics_substeps(code, x, u, p, dt, n, ring, pos, weights, boxes, ground, radius, restitution, friction,
                     contacts_on):
    """Advance ``n`` dynamics steps under a constant control input.

    ``ring`` holds the scheduled world-frame contact forces (one row per future
    step) and ``pos`` its read index.  New impulses are computed against the
    velocity that already includes every scheduled-but-unapplied impulse, so a
    single impact is never counted twice.

    Returns the state, ring index, applied contact forces (n x 3, body frame),
    new impulses (n x 3, world frame), obstacle indices, tunnel flag and the
    largest rolling-constraint residual.
    """
    m = p[P_MT]
    M = ring.shape[0]
    forces = np.zeros((n, 3))
    impulses = np.zeros((n, 3))
    hits = np.full(n, -1)
    tunnel = False
    resid = 0.0
    uk = u.copy()
    for k in range(n):
        F = ring[pos].copy()
        ring[pos] = 0.0
        pos = (pos + 1) % M
        Rm = rotation_matrix(x[3:7])
        Fb = Rm.T @ F
        for a in range(3):
            uk[5 + a] = u[5 + a] + Fb[a]
        x = rk4_step(code, x, uk, p, dt)
        forces[k] = Fb
        if code == MODE_ROLLING:
            resid = max(resid, rolling_residual(x, p))
            continue
        if not contacts_on:
            continue
        Rm = rotation_matrix(x[3:7])
        vw = Rm @ x[7:10]
        pending = np.zeros(3)
        for i in range(M):
            pending += ring[i]
        vw_eff = vw + pending * dt / m
        J, hit, tun = _contacts(x[0:3], vw_eff, boxes, ground, radius, m, restitution, friction)
        tunnel = tunnel or tun
        if hit != -1:
            impulses[k] = J
            hits[k] = hit
            for i in range(M):
                j = (pos + i) % M
                for a in range(3):
                    ring[j, a] += J[a] * weights[i] / dt
    return x, pos, forces, impulses, hits, tunnel, resid
