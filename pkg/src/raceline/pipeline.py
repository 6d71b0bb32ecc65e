"""Raceline workflow: point-mass solve, drone warmstart, drone solve, replay."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import dynamics as dyn
from .corridor import build_corridor
from .geometry import frame_at
from .scenario import Scenario
from .solver import SolveResult, SolverConfig, solve
from .trajectory import Trajectory
from .transcription.curvilinear import build_curvilinear_nlp, corridor_grid
from .transcription.euclidean import build_euclidean_nlp
from .transcription.extract import extract_trajectory
from .transcription.layout import CURVILINEAR, EUCLIDEAN, GridGuess, TranscriptionConfig
from .transcription.models import POINT_MASS, QUADROTOR, VehicleModel
from .transcription.schemes import CollocationScheme

log = logging.getLogger(__name__)

WARM_MU_INIT = 1e-2

__all__ = [
    "PipelineError", "RacelineRun", "TimingReport", "Trajectory", "build_problem", "replay_validate",
    "run_raceline", "scenario_corridor", "solve_drone", "solve_point_mass", "warmstart_drone",
]


class PipelineError(RuntimeError):
    """A solve did not converge.  ``run`` keeps the last iterate and diagnostics."""

    def __init__(self, message: str, run: Optional["RacelineRun"] = None):
        super().__init__(message)
        self.run = run


@dataclass
class TimingReport:
    lap: float
    solver_time: float
    feval_time: float
    total_solve: float
    setup_time: float
    iterations: int = 0
    status: str = ""

    def to_text(self) -> str:
        return (
            f"lap: {self.lap:.6f}\n"
            f"solver: {self.solver_time:.3f}\n"
            f"feval: {self.feval_time:.3f}\n"
            f"total_solve: {self.total_solve:.3f}\n"
            f"setup: {self.setup_time:.3f}\n"
            f"iterations: {self.iterations}\n"
            f"status: {self.status}\n"
        )


@dataclass
class RacelineRun:
    """Everything produced by one solve."""

    trajectory: Trajectory
    timing: TimingReport
    result: SolveResult
    problem: object
    corridor: Optional[list] = None
    warmstart_run: Optional["RacelineRun"] = None

    def __iter__(self):
        # unpacks as (trajectory, timing)
        return iter((self.trajectory, self.timing))


def build_problem(scenario: Scenario, model: VehicleModel, formulation: str, config: TranscriptionConfig,
                  guess: Optional[GridGuess] = None, corridor=None):
    start = time.perf_counter()
    track = scenario.track()
    if formulation == EUCLIDEAN:
        if corridor is not None:
            raise ValueError("corridors are only available in the curvilinear formulation")
        problem = build_euclidean_nlp(track, model, config, guess)
    elif formulation == CURVILINEAR:
        problem = build_curvilinear_nlp(track, model, config, guess, corridor)
    else:
        raise ValueError(f"unknown formulation {formulation!r}")
    problem.metadata["build_time"] = time.perf_counter() - start
    return problem


def scenario_corridor(scenario: Scenario, config: TranscriptionConfig, avoidance_radius: Optional[float] = None) -> list:
    """Rings on the transcription grid of ``config``."""
    s_grid = corridor_grid(scenario.track(), config)
    return build_corridor(scenario.environment(), scenario.curve(), s_grid, scenario.corridor_config(avoidance_radius))


def _run(scenario, model, formulation, config, solver_config, guess, corridor) -> RacelineRun:
    problem = build_problem(scenario, model, formulation, config, guess, corridor)
    result = solve(problem, solver_config)
    traj = extract_trajectory(problem, result.x, converged=result.converged)
    timing = TimingReport(
        lap=traj.lap_time,
        solver_time=result.solver_time,
        feval_time=result.feval_time,
        total_solve=result.total_time,
        setup_time=result.setup_time,
        iterations=result.iterations,
        status=result.status,
    )
    run = RacelineRun(traj, timing, result, problem, corridor)
    if not result.converged:
        raise PipelineError(
            f"{model.kind} {formulation} solve ended with {result.status} ({result.solver_message}) "
            f"after {result.iterations} iterations",
            run,
        )
    return run


def _resolve(scenario, formulation, scheme, config, solver_config):
    formulation = formulation or scenario.formulation
    if config is None:
        config = scenario.transcription_config(scheme)
    elif scheme is not None:
        config = TranscriptionConfig(**{**config.__dict__, "scheme": scheme})
    return formulation, config, solver_config or scenario.solver_config()


def solve_point_mass(scenario: Scenario, formulation: Optional[str] = None, scheme: Optional[CollocationScheme] = None,
                     config: Optional[TranscriptionConfig] = None, solver_config: Optional[SolverConfig] = None,
                     corridor=None) -> RacelineRun:
    """Point-mass raceline with the same thrust-to-weight ratio as the drone."""
    formulation, config, solver_config = _resolve(scenario, formulation, scheme, config, solver_config)
    model = scenario.vehicle_model(POINT_MASS)
    return _run(scenario, model, formulation, config, solver_config, None, corridor)


def warmstart_drone(pm: Trajectory, params: dyn.VehicleParams) -> GridGuess:
    """Drone initial guess from a point-mass raceline on the same grid.

    Each sample's attitude is the minimal rotation taking body z onto the
    point-mass thrust, so yaw is left unexcited.  Rotor thrusts share the
    thrust magnitude equally, clipped to the rotor limits.  Body rates come
    from central differences of the attitude sequence.
    """
    if pm.model.kind != POINT_MASS or pm.grid is None:
        raise ValueError("warmstart needs a point-mass trajectory with its transcription grid")
    grid = pm.grid
    curvi = pm.is_curvilinear
    npos = 2 if curvi else 3
    N = pm.n_elements
    colloc = "XS" in grid

    # all nodes in time order: boundary k, its stages, ..., boundary N
    if colloc:
        d = grid["XS"].shape[1]
        nodes = []
        for k in range(N):
            nodes.append(grid["X"][k])
            nodes.extend(grid["XS"][k])
        nodes.append(grid["X"][N])
        nodes = np.asarray(nodes)
        thrust = pm.inputs.copy()
        thrust[pm.is_boundary] = np.array([pm.input_at(t) for t in pm.times[pm.is_boundary]])
        thrust[~pm.is_boundary] = grid["US"].reshape(-1, 3)
    else:
        nodes = np.asarray(grid["X"])
        thrust = np.vstack([grid["U"], grid["U"][:1]])
    times = pm.times

    quats = []
    prev = np.array([1.0, 0.0, 0.0, 0.0])
    for u in thrust:
        if np.linalg.norm(u) > 1e-9:
            q = dyn.quat_from_two_vectors([0.0, 0.0, 1.0], u)
            if np.dot(q, prev) < 0:
                q = -q
        else:
            q = prev
        quats.append(q)
        prev = q
    quats = np.asarray(quats)
    quats[-1] = quats[0]

    omega = _body_rates(quats, times, pm.lap_time)
    v_glob = nodes[:, npos:npos + 3]
    v_body = np.array([dyn.global_to_body(q, v) for q, v in zip(quats, v_glob)])
    drone_nodes = np.column_stack([nodes[:, :npos], quats, v_body, omega])
    drone_nodes[-1] = drone_nodes[0]

    rotor = np.clip(np.linalg.norm(thrust, axis=1) / 4.0, params.t_min, params.max_rotor_thrust)
    rotor4 = np.repeat(rotor[:, None], 4, axis=1)
    blocks = {"H": np.asarray(grid["H"], dtype=float).copy()}
    if "SIG" in grid:
        blocks["SIG"] = np.asarray(grid["SIG"]).copy()
    if colloc:
        per = d + 1
        body = drone_nodes[:-1].reshape(N, per, -1)
        blocks["X"] = np.vstack([body[:, 0, :], drone_nodes[-1:]])
        blocks["XS"] = body[:, 1:, :]
        blocks["US"] = rotor4[:-1].reshape(N, per, 4)[:, 1:, :]
    else:
        blocks["X"] = drone_nodes
        blocks["U"] = rotor4[:-1]
    return GridGuess(blocks)


def _body_rates(quats: np.ndarray, times: np.ndarray, period: float) -> np.ndarray:
    """Body angular velocity ``2 vec(conj(q) * q_dot)`` with periodic central differences."""
    n = len(quats) - 1  # last sample repeats the first
    t = times[:n]
    q = quats[:n]
    out = np.zeros((len(quats), 3))
    for i in range(n):
        ip, im = (i + 1) % n, (i - 1) % n
        tp = t[ip] + (period if ip == 0 else 0.0)
        tm = t[im] - (period if i == 0 else 0.0)
        qp, qm = q[ip], q[im]
        if np.dot(qp, q[i]) < 0:
            qp = -qp
        if np.dot(qm, q[i]) < 0:
            qm = -qm
        q_dot = (qp - qm) / (tp - tm)
        out[i] = 2.0 * dyn.quat_mul(dyn.quat_conj(q[i]), q_dot)[1:]
    out[n] = out[0]
    return out


def solve_drone(scenario: Scenario, formulation: Optional[str] = None, scheme: Optional[CollocationScheme] = None,
                warmstart: Union[str, Trajectory, GridGuess, None] = "auto", corridor=None,
                config: Optional[TranscriptionConfig] = None,
                solver_config: Optional[SolverConfig] = None) -> RacelineRun:
    """Quadrotor raceline.

    ``warmstart`` is ``"auto"`` (solve the point mass first), a point-mass
    trajectory, a ready :class:`GridGuess`, or ``None``/``"none"`` for the
    centerline hover guess.
    """
    formulation, config, solver_config = _resolve(scenario, formulation, scheme, config, solver_config)
    model = scenario.vehicle_model(QUADROTOR)
    guess = None
    pm_run = None
    if isinstance(warmstart, str) and warmstart == "auto":
        pm_run = solve_point_mass(scenario, formulation, config=config, solver_config=solver_config, corridor=corridor)
        warmstart = pm_run.trajectory
    if isinstance(warmstart, Trajectory):
        guess = warmstart_drone(warmstart, model.params)
    elif isinstance(warmstart, GridGuess):
        guess = warmstart
    elif warmstart not in (None, "none"):
        raise ValueError(f"unsupported warmstart {warmstart!r}")
    if guess is not None:
        # a good initial point does not need a large initial barrier
        solver_config = replace(solver_config, mu_init=min(solver_config.mu_init, WARM_MU_INIT))
    run = _run(scenario, model, formulation, config, solver_config, guess, corridor)
    run.warmstart_run = pm_run
    return run


# --------------------------------------------------------------------------
# replay


@dataclass
class ReplayReport:
    max_divergence: float
    gate_violation: float
    min_clearance: float
    corridor_violation: float
    closure_error: float
    samples: int
    positions: np.ndarray = field(repr=False, default=None)

    def to_text(self) -> str:
        return (
            f"max_position_divergence: {self.max_divergence:.6g}\n"
            f"max_gate_violation: {self.gate_violation:.6g}\n"
            f"min_obstacle_clearance: {self.min_clearance:.6g}\n"
            f"max_corridor_violation: {self.corridor_violation:.6g}\n"
            f"periodic_closure_error: {self.closure_error:.6g}\n"
        )


def replay_validate(traj: Trajectory, scenario: Optional[Scenario] = None, refinement: int = 10,
                    corridor=None, model: Optional[VehicleModel] = None) -> ReplayReport:
    """Integrate the optimized inputs with RK4 from the initial state, independently of the transcription.

    Between consecutive samples ``refinement`` RK4 steps are taken with the
    interpolated input.  Position divergence is measured at every sample.
    """
    model = model or traj.model
    z = np.array(traj.states[0], dtype=float)
    dense = [z[0:3].copy()]
    div = 0.0
    replay_at_samples = [z.copy()]
    for i in range(len(traj.times) - 1):
        t0, t1 = traj.times[i], traj.times[i + 1]
        h = (t1 - t0) / refinement
        for m in range(refinement):
            t = t0 + m * h
            ua, um, ub = traj.input_at(t), traj.input_at(t + 0.5 * h), traj.input_at(t + h)
            k1 = model.derivative(z, ua)
            k2 = model.derivative(z + 0.5 * h * k1, um)
            k3 = model.derivative(z + 0.5 * h * k2, um)
            k4 = model.derivative(z + h * k3, ub)
            z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            dense.append(z[0:3].copy())
        replay_at_samples.append(z.copy())
        div = max(div, float(np.linalg.norm(z[0:3] - traj.states[i + 1, 0:3])))
    dense = np.asarray(dense)
    replay_at_samples = np.asarray(replay_at_samples)

    gate_violation = 0.0
    min_clear = np.inf
    corridor_violation = 0.0
    if scenario is not None:
        radius = model.radius
        for g in scenario.gates():
            gate_violation = max(gate_violation, _gate_crossing_violation(g, dense, radius))
        env = scenario.environment()
        if env.obstacles or env.bounds is not None:
            min_clear = float(np.min(env.signed_distance(dense)))
        if corridor is not None and traj.is_curvilinear:
            corridor_violation = _corridor_violation(scenario.curve(), corridor, traj, replay_at_samples)

    if traj.is_curvilinear:
        w = traj.grid["X"]
        closure = float(np.max(np.abs(w[-1] - w[0])))
    else:
        closure = float(np.max(np.abs(traj.states[-1] - traj.states[0])))
    return ReplayReport(div, gate_violation, float(min_clear), corridor_violation, closure, len(dense), dense)


def _gate_crossing_violation(gate, dense: np.ndarray, radius: float) -> float:
    """Violation at the plane crossing nearest the gate center; infinite if the path never crosses."""
    # the lap is periodic, so the last sample connects back to the first
    pts = np.vstack([dense, dense[:1]])
    d = (pts - gate.center) @ gate.normal
    best = None
    for i in range(len(d) - 1):
        if min(d[i], d[i + 1]) <= 0.0 <= max(d[i], d[i + 1]):
            a = 0.0 if d[i] == d[i + 1] else d[i] / (d[i] - d[i + 1])
            p = pts[i] + a * (pts[i + 1] - pts[i])
            dist = float(np.linalg.norm(p - gate.center))
            if best is None or dist < best[0]:
                best = (dist, p)
    if best is None:
        return float("inf")
    return gate.violation(best[1], radius)


def _corridor_violation(curve, rings, traj: Trajectory, replay_states: np.ndarray) -> float:
    worst = 0.0
    for i, ring in enumerate(rings):
        f = frame_at(curve, ring.s)
        dvec = replay_states[i, 0:3] - f.origin
        y, n = float(dvec @ f.e_y), float(dvec @ f.e_n)
        excess = np.hypot(y - ring.center_yn[0], n - ring.center_yn[1]) - ring.radius
        worst = max(worst, float(excess))
    return worst


def run_raceline(scenario: Scenario, model: str = QUADROTOR, formulation: Optional[str] = None,
                 scheme: Optional[CollocationScheme] = None, warmstart: Union[str, Trajectory, None] = "auto",
                 avoidance_radius: Optional[float] = None, config: Optional[TranscriptionConfig] = None,
                 solver_config: Optional[SolverConfig] = None) -> RacelineRun:
    """Solve ``scenario`` for the chosen model, building the corridor first when the scenario enables it."""
    formulation, config, solver_config = _resolve(scenario, formulation, scheme, config, solver_config)
    corridor = None
    if scenario.corridor_enabled:
        if formulation != CURVILINEAR:
            raise ValueError("scenarios with a corridor need the curvilinear formulation")
        corridor = scenario_corridor(scenario, config, avoidance_radius)
    if model == POINT_MASS or model == "point-mass":
        return solve_point_mass(scenario, formulation, config=config, solver_config=solver_config, corridor=corridor)
    return solve_drone(scenario, formulation, warmstart=warmstart, corridor=corridor, config=config,
                       solver_config=solver_config)


# --------------------------------------------------------------------------
# persistence of solved grids


def save_grid(path, run: RacelineRun) -> None:
    """Store the solved variable blocks so a later run can warmstart from them."""
    traj = run.trajectory
    arrays = {f"block_{k}": np.asarray(v) for k, v in traj.grid.blocks.items()}
    arrays["model"] = np.array(traj.model.kind)
    arrays["formulation"] = np.array(traj.formulation)
    arrays["scheme"] = np.array(traj.scheme.label)
    np.savez(path, **arrays)


def load_grid(path) -> tuple:
    """``(GridGuess, model kind, formulation, scheme label)`` from :func:`save_grid` output."""
    with np.load(path) as data:
        blocks = {k[len("block_"):]: data[k] for k in data.files if k.startswith("block_")}
        return GridGuess(blocks), str(data["model"]), str(data["formulation"]), str(data["scheme"])


def trajectory_from_grid(scenario: Scenario, grid: GridGuess, model_kind: str, formulation: str,
                         config: TranscriptionConfig) -> Trajectory:
    """Rebuild a trajectory from stored blocks on the transcription described by ``config``."""
    model = scenario.vehicle_model(model_kind)
    problem = build_problem(scenario, model, formulation, config)
    x = problem.x0.copy()
    for name, idx in problem.index.items():
        if name not in grid:
            raise ValueError(f"stored grid lacks block {name!r}")
        values = np.asarray(grid[name], dtype=float).reshape(-1)
        if values.size != idx.size:
            raise ValueError(f"stored block {name!r} does not match the transcription grid")
        x[idx] = values
    return extract_trajectory(problem, x)
