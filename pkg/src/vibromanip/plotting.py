"""Figures written next to the CSV outputs. Uses the non-interactive Agg backend."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_trajectory(traj, goal, path, title=""):
    """Path in the gripper frame plus r, psi and phase against time."""
    s = traj.states()
    m = traj.measured_states()
    t = np.asarray(traj.t)
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
    ax = axes[0]
    ax.plot(1e3 * m[:, 0], 1e3 * m[:, 1], ".", ms=1, color="0.75", label="measured")
    ax.plot(1e3 * s[:, 0], 1e3 * s[:, 1], lw=1.2, label="true")
    gx, gy = goal.xy
    ax.plot(1e3 * gx, 1e3 * gy, "r*", ms=12, label="goal")
    ax.plot(0, 0, "k+", ms=10, label="grasp point")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(title or "COM path")

    ax = axes[1]
    ax.plot(t, 1e3 * np.hypot(s[:, 0], s[:, 1]), label="r (mm)")
    ax.plot(t, np.degrees(s[:, 2]), label="psi (deg)")
    ax.axhline(1e3 * goal.r_g, color="C0", ls=":", lw=0.8)
    ax.axhline(math.degrees(goal.psi_g), color="C1", ls=":", lw=0.8)
    # shade phases so the maneuver structure is visible
    changes = [0] + [i for i in range(1, len(traj.phase)) if traj.phase[i] != traj.phase[i - 1]] + [len(t) - 1]
    for k, (a, b) in enumerate(zip(changes[:-1], changes[1:])):
        if k % 2:
            ax.axvspan(t[a], t[b], color="0.92", lw=0)
        ax.text(t[a], ax.get_ylim()[1], traj.phase[a], fontsize=6, rotation=90, va="top")
    ax.set_xlabel("t (s)")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_bench(report, path):
    arms = report.arms
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, key, label in ((axes[0], "pos_err_mm", "position error (mm)"),
                           (axes[1], "psi_err_deg", "orientation error (deg)")):
        data = [[float(r[key]) for r in report.arm_rows(a)] for a in arms]
        ax.boxplot(data, showmeans=True)
        ax.set_xticks(range(1, len(arms) + 1), arms)
        ax.set_ylabel(label)
    fig.suptitle(f"{report.scenario}: {len(report.arm_rows(arms[0]))} trials")
    fig.tight_layout()
    return _save(fig, path)


def plot_sweep(rows, path):
    ok = [r for r in rows if r[2]]
    fig, ax = plt.subplots(figsize=(6, 4))
    if ok:
        f = [r[0] for r in ok]
        ax.plot(f, [r[3] for r in ok], "-", label="analytic")
        ax.plot(f, [r[4] for r in ok], "o", ms=4, label="simulated")
    bad = [r[0] for r in rows if not r[2]]
    if bad:
        ax.plot(bad, [0.0] * len(bad), "x", color="0.5", label="no slip")
    ax.set_xlabel("drive frequency (Hz)")
    ax.set_ylabel("orbital rate (rad/s)")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_feasibility(rows, path, omega_rotate, omega_translate):
    r = np.array([row[0] for row in rows])
    w = np.array([row[3] for row in rows])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(1e3 * r, w, label="minimum slip frequency")
    ax.axhline(omega_rotate / (2 * math.pi), color="C1", ls="--", label="rotation drive")
    ax.axhline(omega_translate / (2 * math.pi), color="C2", ls="--", label="translation drive")
    ax.set_xlabel("r (mm)")
    ax.set_ylabel("frequency (Hz)")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
