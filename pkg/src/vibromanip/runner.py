"""Experiment runners behind the CLI verbs: episodes, paired benchmarks, sweeps."""

from __future__ import annotations

import logging
import math
import statistics
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import export
from .controller import FullStateController, GoalState, Phase, steady_spin_rate
from .errors import Infeasible
from .forces import min_slip_frequency, slip_margin, tilt_force
from .geometry import mass_split
from .scenario import GoalSampling, sample_goals
from .simulator import ActuatorCommand, NoiseStream, ObjectState, Outcome, advance, run, wrap_angle

log = logging.getLogger(__name__)

HZ = 2.0 * math.pi
PHASES = [str(p) for p in Phase]


def trial_streams(seed, index):
    """Sensor and perturbation streams for one trial, identical across arms."""
    sensor, perturb = np.random.SeedSequence([int(seed), int(index)]).spawn(2)
    return NoiseStream(sensor), NoiseStream(perturb)


def togoal_drift(traj):
    """|psi change| from entering ToGoal to the end of the run (0 when ToGoal never ran)."""
    label = str(Phase.TO_GOAL)
    for i, p in enumerate(traj.phase):
        if p == label:
            # the row logging the ToGoal entry still holds the state before that tick
            return abs(wrap_angle(traj.true[-1].psi - traj.true[i].psi))
    return 0.0


def phase_times(traj):
    counts = dict.fromkeys(PHASES, 0)
    for p in traj.phase[:-1]:
        counts[p] += 1
    return {p: n * traj.dt for p, n in counts.items()}


@dataclass
class Episode:
    index: int
    goal: GoalState
    initial: ObjectState
    result: object
    wall_time: float

    @property
    def position_error_mm(self):
        return export.round9(1e3 * self.result.position_error(self.goal))

    @property
    def orientation_error_deg(self):
        return export.round9(math.degrees(self.result.orientation_error(self.goal)))


def run_episode(scenario, goal, initial, index=0, controller_params=None):
    params = controller_params or scenario.controller
    ctrl = FullStateController(params, scenario.sim.r_origin_epsilon)
    streams = trial_streams(scenario.sim.rng_seed, index)
    t0 = time.perf_counter()
    res = run(ctrl, initial, goal, scenario.plant, scenario.sim, streams)
    return Episode(index, goal, initial, res, time.perf_counter() - t0)


def next_initial(scenario, episode):
    """Chain trials from the previous end pose; a Fault falls back to the nominal start."""
    if episode.result.outcome is Outcome.FAULT:
        return scenario.initial
    s = episode.result.final_state
    return ObjectState(s.x, s.y, s.psi)


def run_sequence(scenario, goals, controller_params=None):
    episodes = []
    initial = scenario.initial
    for i, goal in enumerate(goals):
        ep = run_episode(scenario, goal, initial, i, controller_params)
        log.info("trial %d: %s pos %.3f mm psi %.3f deg", i, ep.result.outcome.value,
                 ep.position_error_mm, ep.orientation_error_deg)
        episodes.append(ep)
        initial = next_initial(scenario, ep)
    return episodes


# --- benchmark report --------------------------------------------------------

TRIAL_HEADER = [
    "arm", "trial", "duty_fraction", "r_g_m", "phi_g_rad", "psi_g_rad", "outcome",
    "pos_err_mm", "psi_err_deg", "togoal_drift_deg", "sim_time_s",
] + [f"t_{p}_s" for p in PHASES]


@dataclass
class ArmStats:
    n: int
    reached: int
    success: int
    pos_mean: float
    pos_std: float
    psi_mean: float
    psi_std: float
    drift_mean: float
    phase_time_mean: dict

    @classmethod
    def from_rows(cls, rows, eps_r_mm, eps_psi_deg):
        pos = [float(r["pos_err_mm"]) for r in rows]
        psi = [float(r["psi_err_deg"]) for r in rows]
        reached = [r["outcome"] == Outcome.REACHED.value for r in rows]
        ok = sum(1 for a, p, q in zip(reached, pos, psi) if a and p <= eps_r_mm and q <= eps_psi_deg)
        ptimes = {p: statistics.fmean(float(r[f"t_{p}_s"]) for r in rows) for p in PHASES}
        return cls(
            len(rows), sum(reached), ok,
            statistics.fmean(pos), statistics.pstdev(pos),
            statistics.fmean(psi), statistics.pstdev(psi),
            statistics.fmean(float(r["togoal_drift_deg"]) for r in rows), ptimes,
        )


@dataclass
class BenchReport:
    """Per-trial rows for one or two arms plus their aggregates."""

    scenario: str
    seed: int
    eps_r_mm: float
    eps_psi_deg: float
    rows: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def arms(self):
        return list(dict.fromkeys(r["arm"] for r in self.rows))

    def arm_rows(self, arm):
        return [r for r in self.rows if r["arm"] == arm]

    def aggregate(self):
        self.stats = {a: ArmStats.from_rows(self.arm_rows(a), self.eps_r_mm, self.eps_psi_deg) for a in self.arms}
        return self

    def csv_rows(self):
        for r in self.rows:
            yield [r[k] for k in TRIAL_HEADER]

    def write_trials(self, path):
        export.write_rows(path, TRIAL_HEADER, self.csv_rows())
        self.check_integrity(path)
        return path

    def check_integrity(self, path, tol=1e-12):
        """Aggregates recomputed from the written CSV must match the in-memory ones."""
        rows = export.read_rows(path)
        for arm, st in self.stats.items():
            again = ArmStats.from_rows([r for r in rows if r["arm"] == arm], self.eps_r_mm, self.eps_psi_deg)
            pairs = [(st.pos_mean, again.pos_mean), (st.pos_std, again.pos_std),
                     (st.psi_mean, again.psi_mean), (st.psi_std, again.psi_std),
                     (st.drift_mean, again.drift_mean)]
            pairs += [(st.phase_time_mean[p], again.phase_time_mean[p]) for p in PHASES]
            for a, b in pairs:
                if abs(a - b) > tol * max(1.0, abs(a)):
                    raise RuntimeError(f"report integrity check failed for arm {arm}: {a!r} != {b!r}")
            if (st.n, st.reached, st.success) != (again.n, again.reached, again.success):
                raise RuntimeError(f"report integrity check failed for arm {arm}: counts differ")

    def paired_ok(self):
        """Duty-cycle arm strictly better in mean orientation error than constant drive."""
        if "duty" not in self.stats or "constant" not in self.stats:
            return True
        return self.stats["duty"].psi_mean < self.stats["constant"].psi_mean

    def drift_wins(self):
        """(pairs where the duty arm drifted less during ToGoal, number of pairs)."""
        if "duty" not in self.stats or "constant" not in self.stats:
            return None
        pairs = list(zip(self.arm_rows("duty"), self.arm_rows("constant")))
        wins = sum(1 for d, c in pairs if float(d["togoal_drift_deg"]) < float(c["togoal_drift_deg"]))
        return wins, len(pairs)

    def ratio(self):
        if "duty" not in self.stats or "constant" not in self.stats:
            return None
        d = self.stats["duty"].psi_mean
        return self.stats["constant"].psi_mean / d if d > 0 else math.inf

    def summary(self):
        out = {
            "scenario": self.scenario, "seed": self.seed, "eps_r_mm": self.eps_r_mm,
            "eps_psi_deg": self.eps_psi_deg, "wall_time_s": self.wall_time, "arms": {},
        }
        for arm, st in self.stats.items():
            out["arms"][arm] = {
                "trials": st.n, "reached": st.reached, "within_tolerance": st.success,
                "pos_err_mm_mean": st.pos_mean, "pos_err_mm_std": st.pos_std,
                "psi_err_deg_mean": st.psi_mean, "psi_err_deg_std": st.psi_std,
                "togoal_drift_deg_mean": st.drift_mean,
                "phase_time_s_mean": st.phase_time_mean,
            }
        if self.ratio() is not None:
            out["orientation_ratio_constant_over_duty"] = self.ratio()
            out["duty_better"] = self.paired_ok()
            wins, n = self.drift_wins()
            out["togoal_drift_duty_lower_pairs"] = wins
            out["pairs"] = n
        return out


def _trial_row(arm, duty, ep):
    g = ep.goal
    res = ep.result
    row = {
        "arm": arm, "trial": ep.index, "duty_fraction": float(duty),
        "r_g_m": export.round9(g.r_g), "phi_g_rad": export.round9(g.phi_g),
        "psi_g_rad": export.round9(g.psi_g), "outcome": res.outcome.value,
        "pos_err_mm": ep.position_error_mm, "psi_err_deg": ep.orientation_error_deg,
        "togoal_drift_deg": export.round9(math.degrees(togoal_drift(res.trajectory))),
        "sim_time_s": export.round9(res.sim_time),
    }
    for p, v in phase_times(res.trajectory).items():
        row[f"t_{p}_s"] = export.round9(v)
    return row


def bench(scenario, trials, paired=False):
    """N chained trials; with ``paired`` the same goals and seeds also run at duty 1.0."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sampling = scenario.sampling
    if scenario.goals:
        base = scenario.goals
        goals = [base[i % len(base)] for i in range(trials)]
    else:
        sampling = replace(sampling or GoalSampling(), count=trials)
        goals = sample_goals(scenario, sampling, sampling.seed)
    c = scenario.controller
    duty = c.duty_fraction if c.duty_fraction < 1.0 else 0.5
    arms = [("duty", duty), ("constant", 1.0)] if paired else [("single", c.duty_fraction)]
    report = BenchReport(scenario.name, scenario.sim.rng_seed, 1e3 * c.eps_r, math.degrees(c.eps_psi))
    t0 = time.perf_counter()
    for arm, frac in arms:
        params = replace(c, duty_fraction=frac)
        for ep in run_sequence(scenario, goals, params):
            report.rows.append(_trial_row(arm, frac, ep))
    report.wall_time = time.perf_counter() - t0
    return report.aggregate()


# --- frequency sweep ---------------------------------------------------------

SWEEP_HEADER = ["freq_hz", "omega_rad_s", "feasible", "phi_dot_analytic_rad_s", "phi_dot_sim_rad_s", "rel_err"]


def simulate_steady_spin(scenario, omega, r_c=None, revolutions=5.0, dt=None):
    """Orbital rate measured over ``revolutions`` orbits started on the analytic cycle."""
    plant = scenario.plant
    r_c = scenario.controller.r_c if r_c is None else r_c
    rate = steady_spin_rate(r_c, plant, omega)
    cfg = replace(scenario.sim, sensor_pos_noise_std=0.0, sensor_ang_noise_std=0.0,
                  perturbation_torque_std=0.0, dt=scenario.sim.dt if dt is None else dt)
    state = ObjectState(r_c, 0.0, 0.0, 0.0, r_c * rate, 0.0)
    cmd = ActuatorCommand(math.pi, omega, True)
    n = int(math.ceil(revolutions * 2.0 * math.pi / rate / cfg.dt))
    unwrapped = 0.0
    prev = 0.0
    for _ in range(n):
        state, _ = advance(state, cmd, plant, cfg, None, prev)
        phi = math.atan2(state.y, state.x)
        d = phi - prev
        d -= 2.0 * math.pi * round(d / (2.0 * math.pi))
        unwrapped += d
        prev = phi
    return rate, unwrapped / (n * cfg.dt), state


def sweep_frequency(scenario, freqs_hz, r_c=None):
    rows = []
    r_c = scenario.controller.r_c if r_c is None else r_c
    for f in freqs_hz:
        omega = f * HZ
        if not scenario.plant.feasible(omega, r_c):
            rows.append([float(f), omega, False, math.nan, math.nan, math.nan])
            continue
        try:
            analytic, simulated, _ = simulate_steady_spin(scenario, omega, r_c)
        except Infeasible:
            rows.append([float(f), omega, False, math.nan, math.nan, math.nan])
            continue
        rows.append([float(f), omega, True, analytic, simulated, (simulated - analytic) / analytic])
    return rows


# --- feasibility table -------------------------------------------------------

FEAS_HEADER = [
    "r_m", "f_d_N", "omega_star_rad_s", "omega_star_hz",
    "margin_rotate_N", "margin_translate_N",
]


def feasibility_table(scenario, r_grid):
    plant = scenario.plant
    c = scenario.controller
    rows = []
    for r in r_grid:
        r = float(r)
        f_d = tilt_force(mass_split(scenario.geometry, r), scenario.contact)
        w_star = min_slip_frequency(scenario.erm, scenario.contact, scenario.geometry, r)
        load = plant.static_load(r)
        mus = scenario.contact.mu_static
        ml = scenario.erm.eccentric_mass * scenario.erm.link_length
        rows.append([
            r, f_d, w_star, w_star / HZ,
            slip_margin(ml * c.omega_rotate**2, load, mus),
            slip_margin(ml * c.omega_translate**2, load, mus),
        ])
    return rows
