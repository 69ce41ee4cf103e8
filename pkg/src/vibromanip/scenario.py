"""Scenario files: TOML in, validated parameter blocks out, and back again.

A scenario fully determines a run. Lengths are metres, masses kilograms,
angles radians and times seconds. Drive frequencies are written in Hz
(``*_hz`` keys) and converted to rad/s on load.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .controller import ControllerParams, GoalState
from .errors import ConfigError
from .forces import ContactParams, ErmParams
from .geometry import Disk, ObjectGeometry, PointMass, Rectangle, grip_direction, max_grasp_radius
from .simulator import ObjectState, PlantParams, SimConfig

HZ = 2.0 * math.pi

# section -> key -> type; float keys also accept integers
SCHEMA = {
    "object": {
        "shape": str, "radius": float, "width": float, "height": float, "mass": float,
        "inertia": float, "thickness": float, "inertia_override": bool,
    },
    "erm": {"eccentric_mass": float, "link_length": float},
    "contact": {
        "mu_static": float, "mu_kinetic": float, "grip_preload": float,
        "finger_radius": float, "gravity": float,
    },
    "controller": {
        "eps_r": float, "eps_psi": float, "r_c": float, "theta_kick": float,
        "kick_duration": float, "omega_rotate_hz": float, "omega_translate_hz": float,
        "duty_fraction": float, "duty_period": float, "halt_time": float,
        "phase_budget": float, "settle_fraction": float, "filter_window": int,
        "stall_time": float,
    },
    "sim": {
        "dt": float, "sensor_pos_noise_std": float, "sensor_ang_noise_std": float,
        "perturbation_torque_std": float, "rng_seed": int, "r_origin_epsilon": float,
        "max_sim_time": float,
    },
    "initial": {"x": float, "y": float, "psi": float},
    "goals": {
        "count": int, "r_min": float, "r_max": float, "phi_min": float, "phi_max": float,
        "psi_min": float, "psi_max": float, "seed": int, "max_r_c": float,
    },
}
GOAL_KEYS = {"r": float, "phi": float, "psi": float}
REQUIRED = {
    "object": ("shape", "mass"),
    "erm": ("eccentric_mass", "link_length"),
    "contact": ("mu_static", "mu_kinetic", "grip_preload", "finger_radius"),
}


@dataclass(frozen=True)
class GoalSampling:
    """Uniform goal sampling; ``r_max`` defaults to 0.8 of the workspace radius."""

    count: int = 100
    r_min: float = 0.01
    r_max: float | None = None
    phi_min: float = -math.pi
    phi_max: float = math.pi
    psi_min: float = -math.pi
    psi_max: float = math.pi
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("goal count must be >= 1", "goals.count")
        if self.r_min < 0:
            raise ConfigError("r_min must be >= 0", "goals.r_min")
        if self.r_max is not None and self.r_max < self.r_min:
            raise ConfigError("r_max must be >= r_min", "goals.r_max")
        if self.phi_max < self.phi_min:
            raise ConfigError("phi_max must be >= phi_min", "goals.phi_max")
        if self.psi_max < self.psi_min:
            raise ConfigError("psi_max must be >= psi_min", "goals.psi_max")


@dataclass
class Scenario:
    name: str
    geometry: ObjectGeometry
    erm: ErmParams
    contact: ContactParams
    controller: ControllerParams
    sim: SimConfig
    initial: ObjectState = ObjectState()
    goals: list = field(default_factory=list)
    sampling: GoalSampling | None = None
    max_r_c: float | None = None
    provenance: list = field(default_factory=list)

    @property
    def plant(self):
        return PlantParams(self.erm, self.contact, self.geometry)

    @property
    def workspace_radius(self):
        if self.max_r_c is not None:
            return self.max_r_c
        return self.geometry.shape.half_extent()

    def goal_list(self, seed=None):
        """Explicit goals if any, otherwise ``sampling.count`` sampled goals."""
        if self.goals:
            return list(self.goals)
        sampling = self.sampling or GoalSampling()
        return sample_goals(self, sampling, sampling.seed if seed is None else seed)

    def with_seed(self, seed):
        """Copy with the simulation and goal-sampling seeds replaced."""
        sampling = replace(self.sampling, seed=seed) if self.sampling else None
        return replace(self, sim=replace(self.sim, rng_seed=seed), sampling=sampling)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        keys = ("name", "geometry", "erm", "contact", "controller", "sim", "initial",
                "goals", "sampling", "max_r_c")
        return all(getattr(self, k) == getattr(other, k) for k in keys)


def goal_admissible(geometry, goal: GoalState) -> bool:
    """The grasp point at the goal must sit strictly inside the footprint."""
    if goal.r_g == 0:
        return True
    phi_grip = grip_direction(goal.phi_g, goal.psi_g)
    return goal.r_g < max_grasp_radius(geometry, phi_grip)


def sample_goals(scenario: Scenario, sampling: GoalSampling, seed: int):
    """Uniform goals in (r, phi, psi), rejecting those outside the footprint."""
    rng = np.random.default_rng(seed)
    r_hi = sampling.r_max if sampling.r_max is not None else 0.8 * scenario.workspace_radius
    if r_hi < sampling.r_min:
        raise ConfigError(
            f"goal radius range [{sampling.r_min}, {r_hi}] is empty", "goals.r_max")
    goals = []
    tries = 0
    while len(goals) < sampling.count:
        tries += 1
        if tries > 1000 * sampling.count:
            raise ConfigError("could not sample admissible goals inside the footprint", "goals")
        r = rng.uniform(sampling.r_min, r_hi)
        phi = rng.uniform(sampling.phi_min, sampling.phi_max)
        psi = rng.uniform(sampling.psi_min, sampling.psi_max)
        g = GoalState(r, phi, psi)
        if goal_admissible(scenario.geometry, g):
            goals.append(g)
    return goals


# --- parsing -----------------------------------------------------------------


def _locate(text, section, key=None):
    """1-based line of ``key`` inside ``[section]`` (or of the header itself)."""
    if not text:
        return None
    current = ""
    header_line = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[\[?\s*([A-Za-z0-9_.]+)\s*\]\]?", line)
        if m:
            current = m.group(1)
            if current == section and header_line is None:
                header_line = i
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", line):
            return i
    return header_line if key is None else None


def _locate_field(text, dotted):
    if not dotted:
        return None
    section, _, key = dotted.partition(".")
    if not key:
        return _locate(text, "", section)
    for k in (key, key + "_hz"):
        line = _locate(text, section, k)
        if line is not None:
            return line
    return _locate(text, section)


def _check_type(value, kind, where):
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ConfigError(f"expected {kind.__name__}, got {type(value).__name__} ({value!r})", where)
    return float(value) if kind is float else value


def _validate_raw(raw):
    for section, body in raw.items():
        if section == "name":
            _check_type(body, str, "name")
            continue
        if section == "goal":
            if not isinstance(body, list):
                raise ConfigError("goal entries must be an array of tables", "goal")
            for j, entry in enumerate(body):
                for k, v in entry.items():
                    if k not in GOAL_KEYS:
                        raise ConfigError(f"unknown key {k!r}", f"goal.{k}")
                    _check_type(v, GOAL_KEYS[k], f"goal[{j}].{k}")
                missing = [k for k in GOAL_KEYS if k not in entry]
                if missing:
                    raise ConfigError(f"goal entry {j} is missing {missing}", "goal")
            continue
        if section not in SCHEMA:
            raise ConfigError(f"unknown section {section!r}", section)
        if not isinstance(body, dict):
            raise ConfigError("expected a table", section)
        for k, v in body.items():
            if k not in SCHEMA[section]:
                raise ConfigError(f"unknown key {k!r}", f"{section}.{k}")
            _check_type(v, SCHEMA[section][k], f"{section}.{k}")
    for section, keys in REQUIRED.items():
        for k in keys:
            if k not in raw.get(section, {}):
                raise ConfigError("required key is missing", f"{section}.{k}")


def _build_shape(obj):
    kind = obj["shape"]
    if kind == "disk":
        if "radius" not in obj:
            raise ConfigError("disk needs a radius", "object.radius")
        return Disk(float(obj["radius"]))
    if kind == "rectangle":
        for k in ("width", "height"):
            if k not in obj:
                raise ConfigError(f"rectangle needs {k}", f"object.{k}")
        return Rectangle(float(obj["width"]), float(obj["height"]))
    if kind == "point":
        return PointMass()
    raise ConfigError(f"unknown shape {kind!r} (disk, rectangle or point)", "object.shape")


def _floats(body, keys):
    return {k: float(body[k]) for k in keys if k in body}


def from_dict(raw: dict, text: str = "") -> Scenario:
    """Build a validated scenario from parsed TOML; ``text`` supplies line numbers."""
    try:
        _validate_raw(raw)
        obj = raw["object"]
        geometry = ObjectGeometry(
            _build_shape(obj), float(obj["mass"]),
            inertia=float(obj["inertia"]) if "inertia" in obj else None,
            thickness=float(obj.get("thickness", 0.0)),
            inertia_override=bool(obj.get("inertia_override", False)),
        )
        erm = ErmParams(**_floats(raw["erm"], ("eccentric_mass", "link_length")))
        contact = ContactParams(**_floats(raw["contact"], SCHEMA["contact"]))
        c = dict(raw.get("controller", {}))
        for key in ("omega_rotate", "omega_translate"):
            if key + "_hz" in c:
                c[key] = float(c.pop(key + "_hz")) * HZ
        controller = ControllerParams(**c)
        sim = SimConfig(**raw.get("sim", {}))
        ini = raw.get("initial", {})
        initial = ObjectState(float(ini.get("x", 0.0)), float(ini.get("y", 0.0)), float(ini.get("psi", 0.0)))
        goals = [GoalState(g["r"], g["phi"], g["psi"]) for g in raw.get("goal", [])]
        gs = dict(raw.get("goals", {}))
        max_r_c = gs.pop("max_r_c", None)
        if max_r_c is not None and not max_r_c > 0:
            raise ConfigError("max_r_c must be > 0", "goals.max_r_c")
        sampling = GoalSampling(**gs) if (gs or not goals) else None
        sc = Scenario(raw.get("name", "scenario"), geometry, erm, contact, controller, sim,
                      initial, goals, sampling, max_r_c)
        start = GoalState(initial.r, math.atan2(initial.y, initial.x), initial.psi)
        if not goal_admissible(geometry, start):
            raise ConfigError("initial grasp point lies outside the object", "initial.x")
        for j, g in enumerate(goals):
            if not goal_admissible(geometry, g):
                raise ConfigError(f"goal {j} (r={g.r_g:.4g} m) puts the grasp point outside the object", "goal.r")
        return sc
    except ConfigError as exc:
        if exc.line is None:
            exc.line = _locate_field(text, exc.field)
        raise
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def loads(text: str) -> Scenario:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", line=int(m.group(1)) if m else None) from exc
    return from_dict(raw, text)


def bundled_names():
    root = resources.files("vibromanip") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def read_text(source) -> str:
    """Text of a scenario file, or of a bundled scenario given by name."""
    path = Path(source)
    if path.exists():
        return path.read_text()
    if str(source) in bundled_names():
        return (resources.files("vibromanip") / "scenarios" / f"{source}.toml").read_text()
    raise ConfigError(f"no scenario file or bundled scenario named {str(source)!r} "
                      f"(bundled: {', '.join(bundled_names())})", "scenario")


def load(source, overrides=()) -> Scenario:
    """Load a scenario path or bundled name, applying ``dotted.key=value`` overrides."""
    text = read_text(source)
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", line=int(m.group(1)) if m else None) from exc
    provenance = apply_overrides(raw, overrides)
    sc = from_dict(raw, text)
    sc.provenance = provenance
    return sc


# --- overrides ---------------------------------------------------------------


def parse_override(item: str):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form dotted.key=value", "--set")
    key, _, text = item.partition("=")
    key = key.strip()
    text = text.strip()
    try:
        value = tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        value = text  # bare words become strings
    return key, value


def apply_overrides(raw: dict, overrides) -> list:
    """Apply overrides in place; returns provenance records in application order."""
    records = []
    for item in overrides:
        key, value = parse_override(item)
        parts = key.split(".")
        if len(parts) == 1:
            if parts[0] != "name":
                raise ConfigError(f"unknown key {key!r}", key)
            previous = raw.get("name")
            raw["name"] = value
        elif len(parts) == 2:
            section, k = parts
            if section not in SCHEMA or k not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r}", key)
            table = raw.setdefault(section, {})
            previous = table.get(k)
            table[k] = value
        else:
            raise ConfigError(f"override key {key!r} must be section.key", key)
        records.append({"key": key, "value": value, "previous": previous, "source": "--set"})
    return records


# --- serialization -----------------------------------------------------------


def to_dict(sc: Scenario) -> dict:
    g = sc.geometry
    shape = g.shape
    obj = {"shape": shape.kind}
    if isinstance(shape, Disk):
        obj["radius"] = shape.radius
    elif isinstance(shape, Rectangle):
        obj["width"] = shape.width
        obj["height"] = shape.height
    obj.update(mass=g.mass, inertia=g.inertia, thickness=g.thickness, inertia_override=g.inertia_override)
    c = sc.controller
    controller = {
        "eps_r": c.eps_r, "eps_psi": c.eps_psi, "r_c": c.r_c, "theta_kick": c.theta_kick,
        "kick_duration": c.kick_duration, "omega_rotate_hz": c.omega_rotate / HZ,
        "omega_translate_hz": c.omega_translate / HZ, "duty_fraction": c.duty_fraction,
        "duty_period": c.duty_period, "halt_time": c.halt_time, "phase_budget": c.phase_budget,
        "settle_fraction": c.settle_fraction, "filter_window": int(c.filter_window),
        "stall_time": c.stall_time,
    }
    s = sc.sim
    out = {
        "name": sc.name,
        "object": obj,
        "erm": {"eccentric_mass": sc.erm.eccentric_mass, "link_length": sc.erm.link_length},
        "contact": {
            "mu_static": sc.contact.mu_static, "mu_kinetic": sc.contact.mu_kinetic,
            "grip_preload": sc.contact.grip_preload, "finger_radius": sc.contact.finger_radius,
            "gravity": sc.contact.gravity,
        },
        "controller": controller,
        "sim": {
            "dt": s.dt, "sensor_pos_noise_std": s.sensor_pos_noise_std,
            "sensor_ang_noise_std": s.sensor_ang_noise_std,
            "perturbation_torque_std": s.perturbation_torque_std, "rng_seed": int(s.rng_seed),
            "r_origin_epsilon": s.r_origin_epsilon, "max_sim_time": s.max_sim_time,
        },
        "initial": {"x": sc.initial.x, "y": sc.initial.y, "psi": sc.initial.psi},
    }
    goals = {}
    if sc.sampling is not None:
        goals = {k: v for k, v in vars(sc.sampling).items() if v is not None}
    if sc.max_r_c is not None:
        goals["max_r_c"] = sc.max_r_c
    if goals:
        out["goals"] = goals
    if sc.goals:
        out["goal"] = [{"r": g.r_g, "phi": g.phi_g, "psi": g.psi_g} for g in sc.goals]
    return out


def dumps(sc: Scenario) -> str:
    return tomli_w.dumps(to_dict(sc))
