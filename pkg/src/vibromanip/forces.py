"""Vibration, normal and friction forces at the vibrating finger contact.

All functions are pure. Angular frequencies are in rad/s throughout; configs
that speak Hz convert before reaching this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from scipy import integrate

from .errors import ConfigError
from .geometry import ObjectGeometry, mass_split

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ErmParams:
    """Eccentric rotating mass: mass m on a link of length l spun at omega."""

    eccentric_mass: float
    link_length: float
    drive_frequency: float = 0.0

    def __post_init__(self):
        if not self.eccentric_mass > 0:
            raise ConfigError("eccentric_mass must be > 0", "erm.eccentric_mass")
        if not self.link_length > 0:
            raise ConfigError("link_length must be > 0", "erm.link_length")
        if not self.drive_frequency >= 0:
            raise ConfigError("drive_frequency must be >= 0", "erm.drive_frequency")

    @property
    def amplitude(self):
        """Peak vibration force m*l*omega**2 (N)."""
        return self.eccentric_mass * self.link_length * self.drive_frequency**2

    def at(self, omega):
        return replace(self, drive_frequency=omega)


@dataclass(frozen=True)
class ContactParams:
    mu_static: float
    mu_kinetic: float
    grip_preload: float
    finger_radius: float
    gravity: float = 9.81

    def __post_init__(self):
        if not self.mu_kinetic > 0:
            raise ConfigError("mu_kinetic must be > 0", "contact.mu_kinetic")
        if not self.mu_kinetic < self.mu_static:
            raise ConfigError(
                f"mu_kinetic ({self.mu_kinetic}) must be strictly below mu_static ({self.mu_static})",
                "contact.mu_kinetic",
            )
        if not self.grip_preload >= 0:
            raise ConfigError("grip_preload must be >= 0", "contact.grip_preload")
        if not self.finger_radius > 0:
            raise ConfigError("finger_radius must be > 0", "contact.finger_radius")


@dataclass(frozen=True)
class SlipFeasibility:
    feasible: bool
    margin: float


def vibration_tangential_force(erm: ErmParams, t: float) -> float:
    w = erm.drive_frequency
    return erm.eccentric_mass * erm.link_length * w * w * math.cos(w * t)


def vibration_normal_force(erm: ErmParams, t: float) -> float:
    w = erm.drive_frequency
    return erm.eccentric_mass * erm.link_length * w * w * math.sin(w * t)


def tilt_force(split, contact: ContactParams) -> float:
    """Tilt-balancing couple force g*(m1*r1 - m2*r2)/r_d."""
    return contact.gravity * (split.m1 * split.r1 - split.m2 * split.r2) / contact.finger_radius


def static_normal_load(contact, geometry, r, phi_grip=0.0):
    """Phase-independent part of the normal force: f_b + M*g + f_d(r)."""
    f_d = tilt_force(mass_split(geometry, r, phi_grip), contact)
    return contact.grip_preload + geometry.mass * contact.gravity + f_d


def net_normal_force(erm, contact, geometry, r, t, phi_grip=0.0):
    return static_normal_load(contact, geometry, r, phi_grip) + vibration_normal_force(erm, t)


def slip_active(erm, contact, geometry, r, t, phi_grip=0.0) -> bool:
    f_v = vibration_tangential_force(erm, t)
    f_N = net_normal_force(erm, contact, geometry, r, t, phi_grip)
    return abs(f_v) > contact.mu_static * abs(f_N)


def slip_margin(amplitude, load, mu_s):
    """Phase-maximum of the slip condition, A*sqrt(1+mu_s^2) - mu_s*load."""
    return amplitude * math.sqrt(1.0 + mu_s * mu_s) - mu_s * load


def slip_feasible(erm, contact, geometry, r, phi_grip=0.0) -> SlipFeasibility:
    load = static_normal_load(contact, geometry, r, phi_grip)
    margin = slip_margin(erm.amplitude, load, contact.mu_static)
    return SlipFeasibility(margin > 0, margin)


def min_slip_frequency(erm, contact, geometry, r, phi_grip=0.0) -> float:
    mu = contact.mu_static
    load = static_normal_load(contact, geometry, r, phi_grip)
    return math.sqrt(mu * load / (erm.eccentric_mass * erm.link_length * math.sqrt(1.0 + mu * mu)))


# --- slip intervals over one vibration cycle -------------------------------


def slip_intervals(amplitude, load, mu_s):
    """Phase intervals in [0, 2*pi) where A|cos x| > mu_s |load + A sin x|.

    The condition is piecewise sinusoidal; the pieces are separated by the
    zeros of cos x and of the normal force, and each piece is solved in closed
    form. Returns a list of (x0, x1, sign_of_cos) with x0 < x1.
    """
    A, C = amplitude, load
    if A <= 0:
        return []
    breaks = [0.0, 0.5 * math.pi, 1.5 * math.pi, TWO_PI]
    if C < A:
        s = math.asin(C / A)
        breaks += [math.pi + s, TWO_PI - s]
    breaks = sorted(set(breaks))
    out = []
    for x0, x1 in zip(breaks[:-1], breaks[1:]):
        xm = 0.5 * (x0 + x1)
        s1 = 1.0 if math.cos(xm) >= 0 else -1.0
        s2 = 1.0 if C + A * math.sin(xm) >= 0 else -1.0
        # h(x) = a cos x + b sin x + d on this piece
        a, b, d = s1 * A, -mu_s * s2 * A, -mu_s * s2 * C
        pts = [x0]
        rho = math.hypot(a, b)
        if abs(d) <= rho:
            delta = math.atan2(b, a)
            half = math.acos(-d / rho)
            for root in (delta + half, delta - half):
                root %= TWO_PI
                if x0 < root < x1:
                    pts.append(root)
        pts.append(x1)
        pts.sort()
        for u, v in zip(pts[:-1], pts[1:]):
            if v <= u:
                continue
            m = 0.5 * (u + v)
            if a * math.cos(m) + b * math.sin(m) + d > 0:
                if out and out[-1][1] == u and out[-1][2] == s1:
                    out[-1] = (out[-1][0], v, s1)
                else:
                    out.append((u, v, s1))
    return out


def _cycle_average_closed_form(A, C, mu_s, mu_k):
    if slip_margin(A, C, mu_s) <= 0:
        return 0.0
    total = 0.0
    for x0, x1, s in slip_intervals(A, C, mu_s):
        # antiderivative of s*A*cos x - mu_k*(C + A sin x)
        g1 = s * A * math.sin(x1) - mu_k * (C * x1 - A * math.cos(x1))
        g0 = s * A * math.sin(x0) - mu_k * (C * x0 - A * math.cos(x0))
        total += g1 - g0
    return total / TWO_PI


def effective_net_force(erm, contact, geometry, r, phi_grip=0.0, rtol=1e-8) -> float:
    """Cycle-averaged slip-gated net force, mean of (|f_v| - mu_k f_N) over slip instants.

    Integrated with adaptive quadrature over the exact slip intervals; zero
    when slip is infeasible.
    """
    load = static_normal_load(contact, geometry, r, phi_grip)
    A = erm.amplitude
    mu_s, mu_k = contact.mu_static, contact.mu_kinetic
    if slip_margin(A, load, mu_s) <= 0:
        return 0.0

    def integrand(x):
        return A * abs(math.cos(x)) - mu_k * (load + A * math.sin(x))

    total = 0.0
    for x0, x1, _ in slip_intervals(A, load, mu_s):
        val, _err = integrate.quad(integrand, x0, x1, epsabs=0.0, epsrel=rtol * 1e-2, limit=200)
        total += val
    return total / TWO_PI


def effective_net_force_closed_form(erm, contact, geometry, r, phi_grip=0.0) -> float:
    """Same quantity as :func:`effective_net_force` via the exact antiderivative."""
    load = static_normal_load(contact, geometry, r, phi_grip)
    return _cycle_average_closed_form(erm.amplitude, load, contact.mu_static, contact.mu_kinetic)


def braking_deceleration(contact, geometry, r, phi_grip=0.0) -> float:
    """Translational deceleration mu_k*(f_b + M g + f_d)/M once the drive stops."""
    return contact.mu_kinetic * static_normal_load(contact, geometry, r, phi_grip) / geometry.mass
