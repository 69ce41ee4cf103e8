"""Command-line front end: simulate, bench, sweep-freq and feasibility."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import export, runner
from . import scenario as scn
from .errors import ConfigError, VibromanipError
from .simulator import Outcome

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAULT = 3
EXIT_PAIRED = 4

log = logging.getLogger("vibromanip")


def _range(text, what):
    """'a:b:step' (inclusive of b when it lands on the grid) or 'a,b,c'."""
    try:
        if ":" in text:
            a, b, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            return [a + i * step for i in range(n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {what} {text!r}; use start:stop:step or a comma list", what) from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default="disk",
                        help="scenario TOML file or bundled name (%(default)s)")
    common.add_argument("--seed", type=int, default=None, help="replaces sim.rng_seed and goals.seed")
    common.add_argument("--out", default="out", help="output directory (%(default)s)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a scenario field, e.g. controller.duty_fraction=1.0 (repeatable)")
    common.add_argument("--trials", type=int, default=None, help="number of sampled goals / trials")
    common.add_argument("--paired", action="store_true", help="bench: also run constant drive (duty 1.0)")
    common.add_argument("--no-plots", action="store_true", help="skip the matplotlib figures")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="vibromanip", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="closed-loop episode per goal")
    sub.add_parser("bench", parents=[common], help="Monte-Carlo benchmark over sampled goals")
    sw = sub.add_parser("sweep-freq", parents=[common], help="steady orbital rate against drive frequency")
    sw.add_argument("--freqs", default="120:240:10", help="drive frequencies in Hz (%(default)s)")
    sw.add_argument("--r-c", type=float, default=None, help="orbit radius in m (controller.r_c)")
    fe = sub.add_parser("feasibility", parents=[common], help="slip feasibility over grasp distance")
    fe.add_argument("--r-grid", default=None, help="grasp distances in m, start:stop:step")
    return p


def _header(scenario, args, command):
    return {
        "command": command,
        "scenario": scenario.name,
        "source": str(args.scenario),
        "seed": scenario.sim.rng_seed,
        "overrides": [
            {"key": r["key"], "value": r["value"], "previous": r["previous"], "source": r["source"]}
            for r in scenario.provenance
        ],
    }


def cmd_simulate(scenario, args, out):
    if scenario.goals:
        goals = scenario.goal_list()
    else:
        sampling = scenario.sampling or scn.GoalSampling()
        count = args.trials if args.trials is not None else 1
        goals = scn.sample_goals(scenario, scn.GoalSampling(**{**vars(sampling), "count": count}), sampling.seed)
    episodes = runner.run_sequence(scenario, goals)
    single = len(episodes) == 1
    record = _header(scenario, args, "simulate")
    record["episodes"] = []
    code = EXIT_OK
    for ep in episodes:
        stem = "trajectory" if single else f"trajectory_{ep.index:03d}"
        export.write_trajectory(out / f"{stem}.csv", ep.result.trajectory, scenario.sim.r_origin_epsilon)
        if not args.no_plots and ep.index < 10:
            from .plotting import plot_trajectory
            plot_trajectory(ep.result.trajectory, ep.goal, out / f"{stem}.png",
                            f"{scenario.name} goal {ep.index}")
        res = ep.result
        record["episodes"].append({
            "index": ep.index, "trajectory": f"{stem}.csv",
            "goal": {"r_g": ep.goal.r_g, "phi_g": ep.goal.phi_g, "psi_g": ep.goal.psi_g},
            "outcome": res.outcome.value, "diagnostic": res.diagnostic,
            "pos_err_mm": ep.position_error_mm, "psi_err_deg": ep.orientation_error_deg,
            "sim_time_s": res.sim_time, "wall_time_s": ep.wall_time,
            "phase_events": len(res.events),
        })
        print(f"goal {ep.index}: {res.outcome.value}  pos {ep.position_error_mm:.3f} mm  "
              f"psi {ep.orientation_error_deg:.3f} deg  sim {res.sim_time:.2f} s  wall {ep.wall_time:.2f} s"
              + (f"  ({res.diagnostic})" if res.diagnostic else ""))
        if res.outcome is not Outcome.REACHED:
            code = EXIT_FAULT
    export.write_summary(out / "summary.toml", record)
    return code


def cmd_bench(scenario, args, out):
    trials = args.trials if args.trials is not None else (
        scenario.sampling.count if scenario.sampling else len(scenario.goals))
    if trials < 1:
        raise ConfigError("--trials must be >= 1", "--trials")
    report = runner.bench(scenario, trials, paired=args.paired)
    report.write_trials(out / "trials.csv")
    record = _header(scenario, args, "bench")
    record["paired"] = bool(args.paired)
    record["trials"] = trials
    record.update(report.summary())
    export.write_summary(out / "summary.toml", record)
    if not args.no_plots:
        from .plotting import plot_bench
        plot_bench(report, out / "bench.png")
    for arm, st in report.stats.items():
        print(f"{arm:9s} n={st.n} reached={st.reached} within_tol={st.success}  "
              f"pos {st.pos_mean:.3f} +- {st.pos_std:.3f} mm  psi {st.psi_mean:.3f} +- {st.psi_std:.3f} deg")
    if args.paired:
        print(f"orientation ratio constant/duty = {report.ratio():.3f}")
        if not report.paired_ok():
            print("paired check failed: duty cycle is not better than constant drive", file=sys.stderr)
            return EXIT_PAIRED
    return EXIT_OK


def cmd_sweep(scenario, args, out):
    freqs = _range(args.freqs, "--freqs")
    rows = runner.sweep_frequency(scenario, freqs, args.r_c)
    export.write_rows(out / "sweep.csv", runner.SWEEP_HEADER, rows)
    record = _header(scenario, args, "sweep-freq")
    record["r_c"] = args.r_c if args.r_c is not None else scenario.controller.r_c
    record["feasible_rows"] = sum(1 for r in rows if r[2])
    record["infeasible_hz"] = [r[0] for r in rows if not r[2]]
    export.write_summary(out / "summary.toml", record)
    if not args.no_plots:
        from .plotting import plot_sweep
        plot_sweep(rows, out / "sweep.png")
    for r in rows:
        if r[2]:
            print(f"{r[0]:7.1f} Hz  analytic {r[3]:.5f}  simulated {r[4]:.5f} rad/s  ({100 * r[5]:+.3f} %)")
        else:
            print(f"{r[0]:7.1f} Hz  no slip at this radius")
    return EXIT_OK


def cmd_feasibility(scenario, args, out):
    if args.r_grid:
        grid = _range(args.r_grid, "--r-grid")
    else:
        grid = list(np.linspace(0.0, 0.95 * scenario.workspace_radius, 39))
    limit = scenario.geometry.shape.half_extent()
    for r in grid:
        if r < 0 or r >= limit:
            raise ConfigError(f"grid radius {r} m lies outside the footprint (< {limit} m)", "--r-grid")
    rows = runner.feasibility_table(scenario, grid)
    export.write_rows(out / "feasibility.csv", runner.FEAS_HEADER, rows)
    record = _header(scenario, args, "feasibility")
    record["points"] = len(rows)
    export.write_summary(out / "summary.toml", record)
    if not args.no_plots:
        from .plotting import plot_feasibility
        plot_feasibility(rows, out / "feasibility.png", scenario.controller.omega_rotate,
                         scenario.controller.omega_translate)
    print(f"wrote {len(rows)} rows to {out / 'feasibility.csv'}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "sweep-freq": cmd_sweep,
    "feasibility": cmd_feasibility,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = scn.load(args.scenario, args.overrides)
        if args.seed is not None:
            scenario = scenario.with_seed(args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](scenario, args, out)
    except ConfigError as exc:
        print(f"config error in {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VibromanipError as exc:
        print(f"runtime fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
