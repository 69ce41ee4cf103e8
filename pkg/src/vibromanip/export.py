"""CSV and summary writers. Every float is written with 9 significant digits."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import tomli_w

TRAJECTORY_HEADER = [
    "t", "x", "y", "psi", "r", "phi", "meas_x", "meas_y", "meas_psi",
    "theta", "omega", "gate", "slip", "phase",
]


def fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.9g}"
    return str(value)


def round9(value: float) -> float:
    """The float a reader gets back after a 9-significant-digit round trip."""
    return float(f"{value:.9g}")


def trajectory_rows(traj, r_origin_epsilon):
    for t, s, m, c, slip, phase in zip(traj.t, traj.true, traj.measured, traj.command, traj.slip, traj.phase):
        r = math.hypot(s.x, s.y)
        phi = math.atan2(s.y, s.x) if r > r_origin_epsilon else math.nan
        yield [
            float(t), s.x, s.y, s.psi, r, phi, m.x, m.y, m.psi,
            float(c.steering_angle), float(c.frequency), bool(c.duty_gate_open), bool(slip), phase,
        ]


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_trajectory(path, traj, r_origin_epsilon):
    return write_rows(path, TRAJECTORY_HEADER, trajectory_rows(traj, r_origin_epsilon))


def read_rows(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _plain(obj):
    # tomli_w has no None and wants plain containers
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj if v is not None]
    if isinstance(obj, float):
        return round9(obj) if math.isfinite(obj) else str(obj)
    return obj


def write_summary(path, record: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(tomli_w.dumps(_plain(record)))
    return path
