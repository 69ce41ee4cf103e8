"""Hybrid stick/slip plant: Cartesian RK4 while driven, friction braking otherwise."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, GraspOutsideObject, NonFiniteState, OriginSingularity, PhaseTimeout
from .forces import (
    ContactParams,
    ErmParams,
    _cycle_average_closed_form,
    slip_margin,
    static_normal_load,
)
from .geometry import ObjectGeometry, grip_direction

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Map an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


class ObjectState(NamedTuple):
    x: float = 0.0
    y: float = 0.0
    psi: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    psi_dot: float = 0.0

    @property
    def r(self):
        return math.hypot(self.x, self.y)

    def is_finite(self):
        return all(math.isfinite(v) for v in self)


class ActuatorCommand(NamedTuple):
    """Steering angle (relative to r-hat unless ``absolute``), drive frequency, gate."""

    steering_angle: float = 0.0
    frequency: float = 0.0
    duty_gate_open: bool = True
    absolute: bool = False

    @property
    def driving(self):
        return self.frequency > 0 and self.duty_gate_open


OFF = ActuatorCommand(0.0, 0.0, False)


@dataclass(frozen=True)
class PlantParams:
    erm: ErmParams
    contact: ContactParams
    geometry: ObjectGeometry

    def static_load(self, r, phi_grip=0.0):
        return static_normal_load(self.contact, self.geometry, r, phi_grip)

    def drive_force(self, omega, r, phi_grip=0.0):
        """Effective net force at frequency omega with the tilt frozen at r."""
        load = self.static_load(r, phi_grip)
        A = self.erm.eccentric_mass * self.erm.link_length * omega * omega
        return _cycle_average_closed_form(A, load, self.contact.mu_static, self.contact.mu_kinetic)

    def feasible(self, omega, r, phi_grip=0.0):
        A = self.erm.eccentric_mass * self.erm.link_length * omega * omega
        return slip_margin(A, self.static_load(r, phi_grip), self.contact.mu_static) > 0

    def braking(self, r, phi_grip=0.0):
        """(translational deceleration, angular deceleration) with the drive off.

        The contact-torque lever is hypot(r, r_d): friction at the finger pad,
        offset from the COM by the grasp distance.
        """
        c = self.contact
        n = self.static_load(r, phi_grip)
        lin = c.mu_kinetic * n / self.geometry.mass
        ang = c.mu_kinetic * n * math.hypot(r, c.finger_radius) / self.geometry.inertia
        return lin, ang


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    sensor_pos_noise_std: float = 1.5e-3
    sensor_ang_noise_std: float = math.radians(1.0)
    perturbation_torque_std: float = 3e-4
    rng_seed: int = 0
    r_origin_epsilon: float = 2e-4
    max_sim_time: float = 400.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be > 0", "sim.dt")
        if self.sensor_pos_noise_std < 0 or self.sensor_ang_noise_std < 0:
            raise ConfigError("sensor noise stds must be >= 0", "sim.sensor_pos_noise_std")
        if self.perturbation_torque_std < 0:
            raise ConfigError("perturbation_torque_std must be >= 0", "sim.perturbation_torque_std")
        if not self.r_origin_epsilon > 0:
            raise ConfigError("r_origin_epsilon must be > 0", "sim.r_origin_epsilon")
        if not self.max_sim_time > 0:
            raise ConfigError("max_sim_time must be > 0", "sim.max_sim_time")


class NoiseStream:
    """Standard normals drawn from a numpy Generator in fixed-size blocks."""

    def __init__(self, seed, block=4096):
        self._gen = np.random.default_rng(seed)
        self._block = block
        self._buf = []
        self._i = 0

    def standard_normal(self):
        if self._i >= len(self._buf):
            self._buf = self._gen.standard_normal(self._block).tolist()
            self._i = 0
        v = self._buf[self._i]
        self._i += 1
        return v


def make_streams(seed):
    """Independent (sensor, perturbation) streams derived from one seed."""
    sensor, perturb = np.random.SeedSequence(seed).spawn(2)
    return NoiseStream(sensor), NoiseStream(perturb)


def polar_view(state: ObjectState, r_origin_epsilon: float = 0.0):
    """(r, phi, r_dot, phi_dot) of the COM about the grasp point."""
    x, y = state.x, state.y
    r = math.hypot(x, y)
    if r <= r_origin_epsilon or r == 0.0:
        raise OriginSingularity(f"phi is undefined at r={r:.3g} m")
    phi = math.atan2(y, x)
    r_dot = (x * state.vx + y * state.vy) / r
    phi_dot = (x * state.vy - y * state.vx) / (r * r)
    return r, phi, r_dot, phi_dot


def cartesian_velocity(r, phi, r_dot, phi_dot):
    """Velocity from polar rates: r_dot * r_hat + r * phi_dot * t_hat."""
    c, s = math.cos(phi), math.sin(phi)
    return r_dot * c - r * phi_dot * s, r_dot * s + r * phi_dot * c


def sense(state: ObjectState, cfg: SimConfig, rng) -> ObjectState:
    """Pose measurement with Gaussian noise on x, y and psi; velocities are not sensed."""
    sp, sa = cfg.sensor_pos_noise_std, cfg.sensor_ang_noise_std
    if sp == 0 and sa == 0:
        return ObjectState(state.x, state.y, state.psi, 0.0, 0.0, 0.0)
    nx, ny, npsi = rng.standard_normal(), rng.standard_normal(), rng.standard_normal()
    return ObjectState(state.x + sp * nx, state.y + sp * ny, state.psi + sa * npsi, 0.0, 0.0, 0.0)


def _brake(state, lin, ang, dt):
    x, y, psi, vx, vy, w = state
    speed = math.hypot(vx, vy)
    if speed > 0:
        if speed <= lin * dt:
            tau = speed / lin
            x += 0.5 * vx * tau
            y += 0.5 * vy * tau
            vx = vy = 0.0
        else:
            ux, uy = vx / speed, vy / speed
            x += vx * dt - 0.5 * lin * dt * dt * ux
            y += vy * dt - 0.5 * lin * dt * dt * uy
            vx -= lin * dt * ux
            vy -= lin * dt * uy
    if w != 0:
        aw = abs(w)
        if aw <= ang * dt:
            psi += 0.5 * w * aw / ang
            w = 0.0
        else:
            sgn = 1.0 if w > 0 else -1.0
            psi += w * dt - 0.5 * sgn * ang * dt * dt
            w -= sgn * ang * dt
    return ObjectState(x, y, psi, vx, vy, w)


def _rk4_driven(state, force, theta, absolute, mass, inertia, torque, phi_ref, r_eps, dt):
    c, s = math.cos(theta), math.sin(theta)
    ref_c, ref_s = math.cos(phi_ref), math.sin(phi_ref)
    inv_m = 1.0 / mass
    inv_i = 1.0 / inertia

    def accel(x, y):
        if absolute:
            dx, dy = c, s
        else:
            r = math.hypot(x, y)
            if r > r_eps:
                rx, ry = x / r, y / r
            else:
                rx, ry = ref_c, ref_s
            dx, dy = c * rx - s * ry, s * rx + c * ry
        fx, fy = force * dx, force * dy
        # torque r*F*sin(theta) written as the planar cross product p x F
        return fx * inv_m, fy * inv_m, (x * fy - y * fx + torque) * inv_i

    x, y, psi, vx, vy, w = state
    h = 0.5 * dt
    ax1, ay1, al1 = accel(x, y)
    x2, y2 = x + h * vx, y + h * vy
    vx2, vy2, w2 = vx + h * ax1, vy + h * ay1, w + h * al1
    ax2, ay2, al2 = accel(x2, y2)
    x3, y3 = x + h * vx2, y + h * vy2
    vx3, vy3, w3 = vx + h * ax2, vy + h * ay2, w + h * al2
    ax3, ay3, al3 = accel(x3, y3)
    x4, y4 = x + dt * vx3, y + dt * vy3
    vx4, vy4, w4 = vx + dt * ax3, vy + dt * ay3, w + dt * al3
    ax4, ay4, al4 = accel(x4, y4)
    k = dt / 6.0
    return ObjectState(
        x + k * (vx + 2 * vx2 + 2 * vx3 + vx4),
        y + k * (vy + 2 * vy2 + 2 * vy3 + vy4),
        psi + k * (w + 2 * w2 + 2 * w3 + w4),
        vx + k * (ax1 + 2 * ax2 + 2 * ax3 + ax4),
        vy + k * (ay1 + 2 * ay2 + 2 * ay3 + ay4),
        w + k * (al1 + 2 * al2 + 2 * al3 + al4),
    )


def advance(state, cmd, plant, cfg, rng=None, phi_ref=0.0, dt=None):
    """One plant step. Returns (new_state, slipping)."""
    dt = cfg.dt if dt is None else dt
    r = math.hypot(state.x, state.y)
    phi_grip = grip_direction(math.atan2(state.y, state.x) if r > 0 else phi_ref, state.psi)
    if cmd.frequency > 0 and cmd.duty_gate_open:
        force = plant.drive_force(cmd.frequency, r, phi_grip)
    else:
        force = 0.0
    if force > 0:
        torque = 0.0
        if cfg.perturbation_torque_std > 0 and rng is not None:
            torque = cfg.perturbation_torque_std * rng.standard_normal()
        new = _rk4_driven(
            state, force, cmd.steering_angle, cmd.absolute, plant.geometry.mass,
            plant.geometry.inertia, torque, phi_ref, cfg.r_origin_epsilon, dt,
        )
        slipping = True
    else:
        lin, ang = plant.braking(r, phi_grip)
        new = _brake(state, lin, ang, dt)
        slipping = False
    if not new.is_finite():
        raise NonFiniteState(f"non-finite state after step: {new}")
    return new, slipping


def step(state: ObjectState, cmd: ActuatorCommand, plant: PlantParams, cfg: SimConfig,
         rng=None, phi_ref=None) -> ObjectState:
    """Advance the object by one ``cfg.dt``.

    ``phi_ref`` is the fallback r-hat direction used within ``r_origin_epsilon``
    of the grasp point; it defaults to the current polar angle (0 at the origin).
    """
    if phi_ref is None:
        phi_ref = math.atan2(state.y, state.x) if (state.x or state.y) else 0.0
    return advance(state, cmd, plant, cfg, rng, phi_ref)[0]


@dataclass
class Trajectory:
    """Column-wise log of a closed-loop run; one row per control tick."""

    dt: float
    t: list = field(default_factory=list)
    true: list = field(default_factory=list)
    measured: list = field(default_factory=list)
    command: list = field(default_factory=list)
    slip: list = field(default_factory=list)
    phase: list = field(default_factory=list)

    def append(self, t, true, measured, command, slip, phase):
        self.t.append(t)
        self.true.append(true)
        self.measured.append(measured)
        self.command.append(command)
        self.slip.append(slip)
        self.phase.append(phase)

    def __len__(self):
        return len(self.t)

    def states(self):
        return np.array(self.true, dtype=float).reshape(-1, 6)

    def measured_states(self):
        return np.array(self.measured, dtype=float).reshape(-1, 6)

    def commands(self):
        return np.array([(c.steering_angle, c.frequency, float(c.duty_gate_open)) for c in self.command])


class Outcome(str, Enum):
    REACHED = "Reached"
    TIMEOUT = "Timeout"
    FAULT = "Fault"


@dataclass
class RunResult:
    trajectory: Trajectory
    outcome: Outcome
    final_state: ObjectState
    diagnostic: str = ""
    events: list = field(default_factory=list)
    sim_time: float = 0.0

    def position_error(self, goal):
        gx, gy = goal.r_g * math.cos(goal.phi_g), goal.r_g * math.sin(goal.phi_g)
        return math.hypot(self.final_state.x - gx, self.final_state.y - gy)

    def orientation_error(self, goal):
        return abs(wrap_angle(self.final_state.psi - goal.psi_g))


def check_feasibility(plant, params, initial, goal):
    """Diagnostic string when the drive cannot slip somewhere the run must go, else ''."""
    r_hi = max(initial.r, goal.r_g, params.eps_r)
    problems = []
    if not plant.feasible(params.omega_translate, r_hi):
        problems.append(f"translation drive {params.omega_translate:.4g} rad/s cannot slip at r={r_hi:.4g} m")
    if not plant.feasible(params.omega_rotate, params.r_c):
        problems.append(f"rotation drive {params.omega_rotate:.4g} rad/s cannot slip at r_c={params.r_c:.4g} m")
    return "; ".join(problems)


def run(controller, initial: ObjectState, goal, plant: PlantParams, cfg: SimConfig,
        streams=None, settle_time=5.0) -> RunResult:
    """Closed loop sense -> controller -> plant at period ``cfg.dt``.

    After the controller reports done the drive stays off until the object has
    braked to rest, so reported final errors are at-rest errors.
    """
    traj = Trajectory(cfg.dt)
    diag = check_feasibility(plant, controller.params, initial, goal)
    if diag:
        return RunResult(traj, Outcome.FAULT, initial, "infeasible: " + diag)
    sensor_rng, perturb_rng = streams if streams is not None else make_streams(cfg.rng_seed)
    dt = cfg.dt
    r_eps = cfg.r_origin_epsilon
    state = initial
    phi_ref = math.atan2(initial.y, initial.x) if initial.r > r_eps else goal.phi_g
    n_max = int(math.ceil(cfg.max_sim_time / dt))
    outcome = Outcome.TIMEOUT
    diag = ""
    k = 0
    settle_left = None
    try:
        while k < n_max:
            t = k * dt
            meas = sense(state, cfg, sensor_rng)
            if settle_left is None:
                cmd = controller(meas, goal, t)
            else:
                cmd = OFF
            new, slipping = advance(state, cmd, plant, cfg, perturb_rng, phi_ref)
            traj.append(t, state, meas, cmd, slipping, str(controller.phase))
            state = new
            if state.x or state.y:
                r = math.hypot(state.x, state.y)
                if r > r_eps:
                    phi_ref = math.atan2(state.y, state.x)
            k += 1
            if settle_left is None and controller.done:
                settle_left = int(math.ceil(settle_time / dt))
            if settle_left is not None:
                if state.vx == 0 and state.vy == 0 and state.psi_dot == 0:
                    outcome = Outcome.REACHED
                    break
                settle_left -= 1
                if settle_left <= 0:
                    outcome = Outcome.REACHED
                    break
        else:
            diag = f"max_sim_time {cfg.max_sim_time} s elapsed in phase {controller.phase}"
    except PhaseTimeout as exc:
        outcome, diag = Outcome.TIMEOUT, str(exc)
    except (NonFiniteState, GraspOutsideObject) as exc:
        outcome, diag = Outcome.FAULT, f"{type(exc).__name__}: {exc}"
    t = k * dt
    traj.append(t, state, sense(state, cfg, sensor_rng), OFF, False, str(controller.phase))
    return RunResult(traj, outcome, state, diag, controller.events, t)
