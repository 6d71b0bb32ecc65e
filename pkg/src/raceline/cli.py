"""Command-line entry point: ``raceline {frame,corridor,solve,validate,report} SCENARIO``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .corridor import corridor_table, ring_polylines, validate_corridor
from .geometry import export_frame_table, frame_at
from .pipeline import (
    PipelineError,
    load_grid,
    replay_validate,
    run_raceline,
    save_grid,
    scenario_corridor,
    trajectory_from_grid,
)
from .scenario import ScenarioError, load_scenario
from .transcription.extract import transcription_report
from .transcription.layout import CURVILINEAR
from .transcription.models import POINT_MASS, QUADROTOR

log = logging.getLogger("raceline")

COMMANDS = ("frame", "corridor", "solve", "validate", "report")
REFERENCE_SOFT_TARGET = 0.02


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="raceline", description="Minimum-time periodic racelines for gated 3D tracks.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("scenario", help="scenario YAML file or bundled template name")
    p.add_argument("--model", choices=("point-mass", "quadrotor"), default="quadrotor")
    p.add_argument("--formulation", choices=("euclidean", "curvilinear"))
    p.add_argument("--scheme", choices=("collocation", "rk4"))
    p.add_argument("--degree", type=int, help="collocation degree (1-9)")
    p.add_argument("--elements", type=int, help="elements per phase (Euclidean) or in total (curvilinear)")
    p.add_argument("--avoidance-radius", type=float)
    p.add_argument("--warmstart", choices=("auto", "file", "none"), default="auto")
    p.add_argument("--warmstart-file", help="grid.npz from an earlier point-mass solve (with --warmstart file)")
    p.add_argument("--grid", help="grid.npz from an earlier solve; validate and report reuse it instead of solving")
    p.add_argument("--samples", type=int, default=400, help="frame table rows")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized utilities")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    np.random.seed(args.seed)
    try:
        scenario = load_scenario(args.scenario)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](scenario, args, out)
    except (ScenarioError, PipelineError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _settings(scenario, args):
    formulation = args.formulation or scenario.formulation
    scheme = scenario.scheme(args.scheme, args.degree)
    overrides = {}
    if args.elements is not None:
        overrides["elements_per_phase" if formulation != CURVILINEAR else "elements"] = args.elements
    config = scenario.transcription_config(scheme, **overrides)
    model = POINT_MASS if args.model == "point-mass" else QUADROTOR
    return formulation, config, model


def cmd_frame(scenario, args, out: Path) -> int:
    curve = scenario.curve()
    span = curve.period if curve.period else 10.0
    s0 = float(getattr(curve, "knots", [0.0])[0])
    s = s0 + span * np.arange(args.samples) / args.samples
    export_frame_table(curve, s, out / "frame.csv")
    print(f"wrote {out / 'frame.csv'}")
    return 0


def cmd_corridor(scenario, args, out: Path) -> int:
    formulation, config, _ = _settings(scenario, args)
    rings = scenario_corridor(scenario, config, args.avoidance_radius)
    cc = scenario.corridor_config(args.avoidance_radius)
    report = validate_corridor(scenario.environment(), scenario.curve(), rings,
                               avoidance_radius=cc.avoidance_radius, tolerance=cc.grid_step)
    (out / "corridor.csv").write_text(corridor_table(rings))
    (out / "rings.csv").write_text(ring_polylines(scenario.curve(), rings))
    (out / "corridor_report.txt").write_text(report.to_text())
    print(report.to_text(), end="")
    return 0 if report.ok else 2


def _solve(scenario, args):
    formulation, config, model = _settings(scenario, args)
    warm = args.warmstart
    if model == QUADROTOR and warm == "file":
        if not args.warmstart_file:
            raise ValueError("--warmstart file needs --warmstart-file")
        grid, kind, form, _ = load_grid(args.warmstart_file)
        if kind != POINT_MASS or form != formulation:
            raise ValueError("warmstart file must hold a point-mass solve of the same formulation")
        warm = trajectory_from_grid(scenario, grid, kind, form, config)
    elif warm == "none":
        warm = None
    return run_raceline(scenario, model, formulation, warmstart=warm, avoidance_radius=args.avoidance_radius,
                        config=config)


def _write_run(run, out: Path) -> None:
    (out / "trajectory.csv").write_text(run.trajectory.to_csv())
    (out / "timing.txt").write_text(run.timing.to_text())
    (out / "transcription.txt").write_text(transcription_report(run.problem))
    (out / "iterations.log").write_text(run.result.iteration_log())
    save_grid(out / "grid.npz", run)
    if run.corridor is not None:
        (out / "corridor.csv").write_text(corridor_table(run.corridor))


def cmd_solve(scenario, args, out: Path) -> int:
    try:
        run = _solve(scenario, args)
    except PipelineError as exc:
        if exc.run is not None:
            _write_run(exc.run, out)
        raise
    _write_run(run, out)
    print(run.timing.to_text(), end="")
    return 0


def _trajectory(scenario, args, out: Path):
    """A trajectory from ``--grid`` or a fresh solve, plus the corridor it was solved with."""
    formulation, config, model = _settings(scenario, args)
    corridor = None
    if scenario.corridor_enabled and formulation == CURVILINEAR:
        corridor = scenario_corridor(scenario, config, args.avoidance_radius)
    if args.grid:
        grid, kind, form, _ = load_grid(args.grid)
        return trajectory_from_grid(scenario, grid, kind, form, config), corridor
    run = _solve(scenario, args)
    _write_run(run, out)
    return run.trajectory, run.corridor


def cmd_validate(scenario, args, out: Path) -> int:
    traj, corridor = _trajectory(scenario, args, out)
    rep = replay_validate(traj, scenario, refinement=10, corridor=corridor)
    text = rep.to_text() + _hygiene(scenario, traj)
    (out / "validation.txt").write_text(text)
    print(text, end="")
    ok = rep.gate_violation <= 0.01 and rep.corridor_violation <= 0.01 and rep.max_divergence <= 0.01
    return 0 if ok else 2


def _hygiene(scenario, traj) -> str:
    lines = []
    m = traj.model
    if m.is_quadrotor:
        lo, hi = m.input_bounds()
        lines.append(f"rotor_thrust_range: {traj.inputs.min():.6g} {traj.inputs.max():.6g} (limits {lo[0]:.6g} {hi[0]:.6g})")
        qn = np.linalg.norm(traj.boundary_states[:, 3:7], axis=1)
        lines.append(f"max_quaternion_norm_error: {np.max(np.abs(qn - 1.0)):.3g}")
    else:
        lines.append(f"max_thrust: {np.linalg.norm(traj.inputs, axis=1).max():.6g} (limit {m.params.max_total_thrust:.6g})")
    if traj.is_curvilinear:
        c = traj.curvilinear
        f = frame_at(scenario.curve(), c[:, 0])
        margin = f.kappa_y * c[:, 2] + f.kappa_n * c[:, 1]
        lines.append(f"max_regularity_margin: {margin.max():.6g}")
    return "\n".join(lines) + "\n"


def cmd_report(scenario, args, out: Path) -> int:
    traj, _ = _trajectory(scenario, args, out)
    lines = [f"scenario: {scenario.name}", f"lap: {traj.lap_time:.6f}"]
    refs = scenario.reference_lap_times
    if not refs:
        lines.append("reference_lap_times: none supplied")
    for label, ref in refs.items():
        delta = (traj.lap_time - ref) / ref
        status = "within" if abs(delta) <= REFERENCE_SOFT_TARGET else "outside"
        lines.append(f"reference {label}: {ref:.6f} delta {100 * delta:+.2f}% ({status} 2% soft target)")
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    print(text, end="")
    return 0


_COMMANDS = {
    "frame": cmd_frame,
    "corridor": cmd_corridor,
    "solve": cmd_solve,
    "validate": cmd_validate,
    "report": cmd_report,
}


if __name__ == "__main__":
    sys.exit(main())
