"""Object footprints, inertia, and the two-sided mass split about a grasp line."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .errors import ConfigError, GraspOutsideObject


@dataclass(frozen=True)
class Disk:
    radius: float

    kind = "disk"

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError("disk radius must be > 0", "object.radius")

    def plate_inertia(self, mass):
        return 0.5 * mass * self.radius**2

    def contains(self, px, py):
        return math.hypot(px, py) <= self.radius

    def half_extent(self):
        return self.radius


@dataclass(frozen=True)
class Rectangle:
    width: float
    height: float

    kind = "rectangle"

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ConfigError("rectangle width and height must be > 0", "object.width")

    def plate_inertia(self, mass):
        return mass * (self.width**2 + self.height**2) / 12.0

    def contains(self, px, py):
        return abs(px) <= 0.5 * self.width and abs(py) <= 0.5 * self.height

    def half_extent(self):
        return 0.5 * min(self.width, self.height)

    def corners(self):
        a, b = 0.5 * self.width, 0.5 * self.height
        return [(-a, -b), (a, -b), (a, b), (-a, b)]


@dataclass(frozen=True)
class PointMass:
    kind = "point"

    def plate_inertia(self, mass):
        return None

    def contains(self, px, py):
        return True

    def half_extent(self):
        return math.inf


Shape = Union[Disk, Rectangle, PointMass]


@dataclass(frozen=True)
class ObjectGeometry:
    """Planar object: footprint, mass M and inertia I about the COM.

    When ``inertia`` is omitted it is filled from the uniform-plate formula.
    A supplied inertia must sit within 1% of that value unless
    ``inertia_override`` is set. Thickness is carried as metadata only.
    """

    shape: Shape
    mass: float
    inertia: float | None = None
    thickness: float = 0.0
    inertia_override: bool = False

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError("object mass must be > 0", "object.mass")
        plate = self.shape.plate_inertia(self.mass)
        if self.inertia is None:
            if plate is None:
                raise ConfigError("point-mass objects need an explicit inertia", "object.inertia")
            object.__setattr__(self, "inertia", plate)
        if not self.inertia > 0:
            raise ConfigError("object inertia must be > 0", "object.inertia")
        if plate is not None and not self.inertia_override:
            if abs(self.inertia - plate) > 0.01 * plate:
                raise ConfigError(
                    f"inertia {self.inertia:.6g} is more than 1% away from the uniform-plate "
                    f"value {plate:.6g}; set inertia_override to keep it",
                    "object.inertia",
                )


@dataclass(frozen=True)
class MassSplit:
    """Heavy side (m1 at r1) and light side (m2 at r2) of the grasp line.

    r1 and r2 are perpendicular distances of each side's COM from the line.
    """

    m1: float
    r1: float
    m2: float
    r2: float

    @property
    def imbalance(self):
        return self.m1 * self.r1 - self.m2 * self.r2


def grasp_point(r, phi_grip):
    """Grasp point in the object body frame, COM at the origin."""
    return r * math.cos(phi_grip), r * math.sin(phi_grip)


def grip_direction(phi, psi):
    """Body-frame direction of the grasp point seen from the COM.

    The COM sits at polar (r, phi) from the grasp point in the world frame, so
    the grasp point lies along phi + pi; undo the body rotation psi.
    """
    return phi + math.pi - psi


def mass_split(geometry: ObjectGeometry, r: float, phi_grip: float = 0.0) -> MassSplit:
    """Split the object by the line through the grasp point normal to the COM-grasp axis."""
    if r < 0:
        raise ValueError("grasp distance r must be >= 0")
    shape = geometry.shape
    M = geometry.mass
    if isinstance(shape, PointMass):
        return MassSplit(M, r, 0.0, 0.0)
    px, py = grasp_point(r, phi_grip)
    if not shape.contains(px, py):
        raise GraspOutsideObject(f"grasp point at r={r:.6g} m lies outside the {shape.kind} footprint")
    if isinstance(shape, Disk):
        return _disk_split(shape.radius, M, r)
    return _rectangle_split(shape, M, r, phi_grip)


def _disk_split(R, M, d):
    # light side is the circular segment beyond the chord at distance d from the centre
    if d >= R:
        return MassSplit(M, d, 0.0, 0.0)
    half_chord = math.sqrt(R * R - d * d)
    area = math.pi * R * R
    seg = R * R * math.acos(d / R) - d * half_chord
    seg_centroid = (2.0 / 3.0) * half_chord**3 / seg
    rest = area - seg
    m2 = M * seg / area
    m1 = M - m2
    r2 = seg_centroid - d
    r1 = d + seg * seg_centroid / rest
    return MassSplit(m1, r1, m2, r2)


def _rectangle_split(shape, M, r, phi_grip):
    ux, uy = math.cos(phi_grip), math.sin(phi_grip)
    px, py = r * ux, r * uy
    # signed distance of each corner past the grasp line; positive is the light side
    light = _clip_halfplane(shape.corners(), ux, uy, px * ux + py * uy)
    area = shape.width * shape.height
    a2, c2x, c2y = _polygon_area_centroid(light)
    m2 = M * a2 / area
    m1 = M - m2
    if a2 > 0:
        r2 = (c2x - px) * ux + (c2y - py) * uy
        # heavy side centroid follows from the total first moment being zero at the COM
        c1x, c1y = -a2 * c2x / (area - a2), -a2 * c2y / (area - a2)
    else:
        r2 = 0.0
        c1x, c1y = 0.0, 0.0
    r1 = -((c1x - px) * ux + (c1y - py) * uy)
    return MassSplit(m1, r1, m2, r2)


def _clip_halfplane(poly, nx, ny, offset):
    """Sutherland-Hodgman clip of ``poly`` to {x : n.x >= offset}."""
    out = []
    k = len(poly)
    for i in range(k):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % k]
        da = ax * nx + ay * ny - offset
        db = bx * nx + by * ny - offset
        if da >= 0:
            out.append((ax, ay))
        if (da >= 0) != (db >= 0):
            s = da / (da - db)
            out.append((ax + s * (bx - ax), ay + s * (by - ay)))
    return out


def _polygon_area_centroid(poly):
    if len(poly) < 3:
        return 0.0, 0.0, 0.0
    a = cx = cy = 0.0
    k = len(poly)
    for i in range(k):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % k]
        cross = x0 * y1 - x1 * y0
        a += cross
        cx += (x0 + x1) * cross
        cy += (y0 + y1) * cross
    a *= 0.5
    if a == 0:
        return 0.0, 0.0, 0.0
    return a, cx / (6 * a), cy / (6 * a)


def max_grasp_radius(geometry: ObjectGeometry, phi_grip: float = 0.0) -> float:
    """Distance from the COM to the footprint edge along ``phi_grip``."""
    shape = geometry.shape
    if isinstance(shape, Disk):
        return shape.radius
    if isinstance(shape, Rectangle):
        c, s = abs(math.cos(phi_grip)), abs(math.sin(phi_grip))
        limits = []
        if c > 0:
            limits.append(0.5 * shape.width / c)
        if s > 0:
            limits.append(0.5 * shape.height / s)
        return min(limits)
    return math.inf
