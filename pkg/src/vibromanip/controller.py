"""Steering law, duty gating and the full-state manipulation phase machine."""

from __future__ import annotations

import enum
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace

from .errors import ConfigError, DegenerateTarget, Infeasible, PhaseTimeout, ZeroAngularVelocity
from .simulator import OFF, ActuatorCommand, ObjectState, wrap_angle

log = logging.getLogger(__name__)

HZ = 2.0 * math.pi


@dataclass(frozen=True)
class GoalState:
    r_g: float
    phi_g: float
    psi_g: float

    def __post_init__(self):
        if not self.r_g >= 0:
            raise ConfigError("goal radius must be >= 0", "goal.r_g")
        object.__setattr__(self, "phi_g", wrap_angle(self.phi_g))
        object.__setattr__(self, "psi_g", wrap_angle(self.psi_g))

    @property
    def xy(self):
        return self.r_g * math.cos(self.phi_g), self.r_g * math.sin(self.phi_g)


@dataclass(frozen=True)
class ControllerParams:
    eps_r: float = 1e-3
    eps_psi: float = math.radians(1.0)
    r_c: float = 7.75e-3
    theta_kick: float = math.pi / 5
    kick_duration: float = 0.1
    omega_rotate: float = 168.0 * HZ
    omega_translate: float = 240.0 * HZ
    duty_fraction: float = 0.5
    duty_period: float = 0.02
    halt_time: float = 0.1
    phase_budget: float = 150.0
    # Rotate and ToGoal stop at this fraction of their tolerance, leaving room
    # for the drift picked up while the later phases run and brake
    settle_fraction: float = 0.5
    # number of recent pose samples averaged before the controller acts on them
    filter_window: int = 5
    # Rotate restarts from ToCom when |psi error| has not improved by eps_psi for this long
    stall_time: float = 5.0

    def __post_init__(self):
        if not self.eps_r > 0:
            raise ConfigError("eps_r must be > 0", "controller.eps_r")
        if not self.eps_psi > 0:
            raise ConfigError("eps_psi must be > 0", "controller.eps_psi")
        if not self.r_c > 0:
            raise ConfigError("r_c must be > 0", "controller.r_c")
        if not self.kick_duration > 0:
            raise ConfigError("kick_duration must be > 0", "controller.kick_duration")
        if math.sin(self.theta_kick) == 0 or abs(math.sin(self.theta_kick)) < 1e-9:
            raise ConfigError("theta_kick must not be 0 or pi", "controller.theta_kick")
        if not 0 < self.duty_fraction <= 1:
            raise ConfigError("duty_fraction must lie in (0, 1]", "controller.duty_fraction")
        if not self.duty_period > 0:
            raise ConfigError("duty_period must be > 0", "controller.duty_period")
        if self.omega_rotate < 0 or self.omega_translate < 0:
            raise ConfigError("drive frequencies must be >= 0", "controller.omega_rotate")
        if self.halt_time < 0:
            raise ConfigError("halt_time must be >= 0", "controller.halt_time")
        if not self.phase_budget > 0:
            raise ConfigError("phase_budget must be > 0", "controller.phase_budget")
        if int(self.filter_window) != self.filter_window or self.filter_window < 1:
            raise ConfigError("filter_window must be a positive integer", "controller.filter_window")
        if not self.stall_time > 0:
            raise ConfigError("stall_time must be > 0", "controller.stall_time")
        if not 0 < self.settle_fraction <= 1:
            raise ConfigError("settle_fraction must lie in (0, 1]", "controller.settle_fraction")


class Phase(enum.Enum):
    TO_COM = "ToCom"
    SPIN_UP_RADIUS = "SpinUpRadius"
    KICK = "Kick"
    ROTATE = "Rotate"
    RETURN_TO_COM = "ReturnToCom"
    DEPART_ORIGIN = "DepartOrigin"
    TO_GOAL = "ToGoal"
    DONE = "Done"

    def __str__(self):
        return self.value


PHASE_ORDER = list(Phase)


@dataclass(frozen=True)
class ControllerState:
    phase: Phase = Phase.TO_COM
    phase_clock: float = 0.0  # time the current phase started driving
    rotation_direction: int = 1
    halt_until: float | None = None
    best_error: float = math.inf  # best |psi error| seen in the current Rotate
    best_time: float = 0.0
    events: tuple = field(default=(), compare=False)


def position_steering(measured: ObjectState, target) -> float:
    """Steering angle relative to r-hat that points the drive at ``target`` = (r_g, phi_g)."""
    r_g, phi_g = target
    k1 = r_g * math.cos(phi_g) - measured.x
    k2 = r_g * math.sin(phi_g) - measured.y
    if k1 == 0 and k2 == 0:
        raise DegenerateTarget("current position equals the target")
    phi = math.atan2(measured.y, measured.x)
    return wrap_angle(math.atan2(k2, k1) - phi)


def duty_gate(t: float, params: ControllerParams) -> bool:
    if params.duty_fraction >= 1.0:
        return True
    return math.fmod(t, params.duty_period) < params.duty_fraction * params.duty_period


def required_steering_for_circle(phi_dot: float, phi_ddot: float) -> float:
    """Steering angle holding a constant radius, from tan(theta) = -phi_ddot / phi_dot**2."""
    if phi_dot == 0:
        raise ZeroAngularVelocity("the steering rule needs a non-zero orbital rate")
    return math.atan2(-phi_ddot, phi_dot * phi_dot)


def steady_spin_rate(r_c: float, plant, omega: float, phi_grip: float = 0.0) -> float:
    """Orbital rate of the constant-radius cycle at r_c driven with theta = pi."""
    if not r_c > 0:
        raise ValueError("r_c must be > 0")
    force = plant.drive_force(omega, r_c, phi_grip)
    if force <= 0:
        raise Infeasible(f"no net drive at r_c={r_c:.4g} m and omega={omega:.4g} rad/s")
    return math.sqrt(force / (plant.geometry.mass * r_c))


def _translate(theta, params, t, absolute=False):
    return ActuatorCommand(theta, params.omega_translate, duty_gate(t, params), absolute)


def _next_phase(phase, measured, goal, params, r_origin_epsilon):
    """Phase to enter after ``phase`` ends, skipping phases whose exit test already holds."""
    r = math.hypot(measured.x, measured.y)
    psi_err = wrap_angle(measured.psi - goal.psi_g)
    goal_reached = abs(r - goal.r_g) <= params.eps_r
    if phase is Phase.TO_COM:
        if abs(psi_err) > params.settle_fraction * params.eps_psi:
            return Phase.SPIN_UP_RADIUS
        phase = Phase.RETURN_TO_COM
    if phase is Phase.RETURN_TO_COM:
        if goal_reached:
            return Phase.DONE
        return Phase.DEPART_ORIGIN
    if phase is Phase.DEPART_ORIGIN:
        return Phase.DONE if goal_reached else Phase.TO_GOAL
    if phase is Phase.TO_GOAL:
        return Phase.DONE
    return PHASE_ORDER[PHASE_ORDER.index(phase) + 1]


# phases followed by a full stop; the others hand over after a single drive-off tick
_BRAKED_EXITS = {Phase.TO_COM, Phase.SPIN_UP_RADIUS, Phase.ROTATE, Phase.RETURN_TO_COM, Phase.TO_GOAL}


def _transition(ctrl, to, t, params, measured, goal):
    events = ctrl.events + ({"t": t, "from": str(ctrl.phase), "to": str(to)},)
    log.debug("phase %s -> %s at t=%.4f", ctrl.phase, to, t)
    direction = ctrl.rotation_direction
    if to is Phase.KICK:
        direction = 1 if wrap_angle(goal.psi_g - measured.psi) >= 0 else -1
    hold = params.halt_time if ctrl.phase in _BRAKED_EXITS else 0.0
    return replace(
        ctrl, phase=to, phase_clock=t + hold, rotation_direction=direction,
        halt_until=t + hold, best_error=math.inf, best_time=t + hold, events=events,
    )


def algorithm_step(ctrl: ControllerState, measured: ObjectState, goal: GoalState,
                   params: ControllerParams, t: float, r_origin_epsilon: float = 2e-4):
    """One controller tick: returns (ActuatorCommand, ControllerState).

    Every phase change emits the drive-off command and holds it for
    ``params.halt_time`` so the object brakes to rest between phases.
    """
    if ctrl.halt_until is not None:
        if t < ctrl.halt_until - 1e-9:
            return OFF, ctrl
        ctrl = replace(ctrl, halt_until=None, phase_clock=t)
    phase = ctrl.phase
    if phase is Phase.DONE:
        return OFF, ctrl
    elapsed = t - ctrl.phase_clock
    if elapsed > params.phase_budget:
        raise PhaseTimeout(str(phase), elapsed, params.phase_budget)

    r = math.hypot(measured.x, measured.y)
    psi_err = wrap_angle(measured.psi - goal.psi_g)
    end = False
    nxt = None
    cmd = OFF

    if phase is Phase.TO_COM or phase is Phase.RETURN_TO_COM:
        if r <= params.eps_r:
            end = True
        else:
            cmd = _translate(position_steering(measured, (0.0, 0.0)), params, t)
    elif phase is Phase.SPIN_UP_RADIUS:
        if r >= params.r_c:
            end = True
        else:
            cmd = ActuatorCommand(0.0, params.omega_rotate, True)
    elif phase is Phase.KICK:
        if elapsed >= params.kick_duration - 1e-12:
            end = True
        else:
            theta = ctrl.rotation_direction * abs(wrap_angle(params.theta_kick))
            cmd = ActuatorCommand(theta, params.omega_rotate, True)
    elif phase is Phase.ROTATE:
        if abs(psi_err) <= params.settle_fraction * params.eps_psi:
            end = True
        elif abs(psi_err) < 0.5 * math.pi and (-psi_err > 0) != (ctrl.rotation_direction > 0):
            # passed the goal; beyond the tolerance it has to be kicked back
            end = True
            if abs(psi_err) > params.eps_psi:
                nxt = Phase.KICK
        elif abs(psi_err) < ctrl.best_error - params.eps_psi or ctrl.best_error == math.inf:
            ctrl = replace(ctrl, best_error=abs(psi_err), best_time=t)
            cmd = ActuatorCommand(math.pi, params.omega_rotate, True)
        elif t - ctrl.best_time > params.stall_time:
            # spin died out, reversed, or the orbit left the slip band: start over from the COM
            nxt = Phase.TO_COM
            end = True
        else:
            cmd = ActuatorCommand(math.pi, params.omega_rotate, True)
    elif phase is Phase.DEPART_ORIGIN:
        if abs(r - goal.r_g) <= params.eps_r or r > r_origin_epsilon:
            end = True
        else:
            cmd = _translate(goal.phi_g, params, t, absolute=True)
    elif phase is Phase.TO_GOAL:
        if abs(r - goal.r_g) <= params.settle_fraction * params.eps_r:
            end = True
        else:
            gx, gy = goal.xy
            if r <= r_origin_epsilon:
                if gx == measured.x and gy == measured.y:
                    raise DegenerateTarget("current position equals the target")
                cmd = _translate(math.atan2(gy - measured.y, gx - measured.x), params, t, absolute=True)
            else:
                cmd = _translate(position_steering(measured, (goal.r_g, goal.phi_g)), params, t)

    if not end:
        return cmd, ctrl
    if nxt is None:
        nxt = _next_phase(phase, measured, goal, params, r_origin_epsilon)
    ctrl = _transition(ctrl, nxt, t, params, measured, goal)
    if phase is Phase.KICK and nxt is Phase.ROTATE:
        # the steering swings straight to pi; braking here would eat the kicked spin
        return algorithm_step(replace(ctrl, halt_until=None), measured, goal, params, t, r_origin_epsilon)
    # phases skipped over in the same tick still get logged
    while nxt is Phase.DEPART_ORIGIN and (r > r_origin_epsilon or abs(r - goal.r_g) <= params.eps_r):
        nxt = _next_phase(nxt, measured, goal, params, r_origin_epsilon)
        ctrl = _transition(ctrl, nxt, t, params, measured, goal)
    return OFF, ctrl


class PoseFilter:
    """Moving average over the last ``window`` poses; psi is averaged unwrapped."""

    def __init__(self, window: int):
        self.window = int(window)
        self._buf = deque(maxlen=self.window)

    def reset(self):
        self._buf.clear()

    def __call__(self, measured: ObjectState) -> ObjectState:
        if self.window == 1:
            return measured
        if self._buf:
            # keep psi continuous with the previous sample so the mean does not jump at +-pi
            last = self._buf[-1]
            psi = last[2] + wrap_angle(measured.psi - last[2])
        else:
            psi = measured.psi
        self._buf.append((measured.x, measured.y, psi))
        n = len(self._buf)
        sx = sum(p[0] for p in self._buf) / n
        sy = sum(p[1] for p in self._buf) / n
        spsi = sum(p[2] for p in self._buf) / n
        return ObjectState(sx, sy, wrap_angle(spsi))


class FullStateController:
    """Stateful wrapper around :func:`algorithm_step` for the closed loop."""

    def __init__(self, params: ControllerParams, r_origin_epsilon: float = 2e-4):
        self.params = params
        self.r_origin_epsilon = r_origin_epsilon
        self.state = ControllerState()
        self.filter = PoseFilter(params.filter_window)

    def reset(self):
        self.state = ControllerState()
        self.filter.reset()

    @property
    def phase(self):
        return self.state.phase

    @property
    def done(self):
        return self.state.phase is Phase.DONE

    @property
    def events(self):
        return list(self.state.events)

    def __call__(self, measured, goal, t):
        smoothed = self.filter(measured)
        cmd, self.state = algorithm_step(self.state, smoothed, goal, self.params, t, self.r_origin_epsilon)
        return cmd
