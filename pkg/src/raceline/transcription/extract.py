"""Turn a solved transcription back into time-stamped samples."""

from __future__ import annotations

import logging

import numpy as np

from ..geometry import frame_at
from ..trajectory import Trajectory
from .layout import CURVILINEAR, GridGuess
from .nlp import NlpProblem

log = logging.getLogger(__name__)


def grid_values(problem: NlpProblem, x) -> GridGuess:
    """Reshape a solution vector into named blocks (see :class:`GridGuess`)."""
    meta = problem.metadata
    model, scheme, N, nw = meta["model"], meta["scheme"], meta["N"], meta["nw"]
    blocks = {"X": problem.values(x, "X").reshape(N + 1, nw), "H": problem.values(x, "H")}
    if scheme.is_collocation:
        d = scheme.degree
        blocks["XS"] = problem.values(x, "XS").reshape(N, d, nw)
        blocks["US"] = problem.values(x, "US").reshape(N, d, model.n_u)
        if "SIG" in problem.index:
            blocks["SIG"] = problem.values(x, "SIG").reshape(N, d)
    else:
        blocks["U"] = problem.values(x, "U").reshape(N, model.n_u)
    return GridGuess(blocks)


def element_durations(problem: NlpProblem, grid: GridGuess) -> np.ndarray:
    meta = problem.metadata
    if meta["formulation"] == CURVILINEAR:
        return np.asarray(grid["H"], dtype=float)
    return np.repeat(np.asarray(grid["H"], dtype=float), meta["K"])


def extract_trajectory(problem: NlpProblem, x, converged: bool = True) -> Trajectory:
    """Samples at element boundaries and stage points, ordered by time.

    The lap time is the sum of element durations, which equals the
    objective of both formulations.
    """
    if not converged:
        log.warning("extracting a trajectory from a solution that did not converge")
    meta = problem.metadata
    model, scheme, N = meta["model"], meta["scheme"], meta["N"]
    grid = grid_values(problem, x)
    h = element_durations(problem, grid)
    t_nodes = np.concatenate([[0.0], np.cumsum(h)])
    curvi = meta["formulation"] == CURVILINEAR
    co = scheme.coefficients if scheme.is_collocation else None

    elements = {"t": t_nodes}
    times, states, flags = [], [], []
    if co is not None:
        d = scheme.degree
        if curvi:
            sig = grid["SIG"]
            stage_dt = meta["ds"] * sig @ co.A.T  # (N, d) elapsed time at each stage
            elements.update(SIG=sig, ds=meta["ds"])
        else:
            stage_dt = h[:, None] * co.tau[None, 1:]
        elements["US"] = grid["US"]
        for k in range(N):
            times.append(t_nodes[k])
            states.append(grid["X"][k])
            flags.append(True)
            for j in range(d):
                times.append(t_nodes[k] + stage_dt[k, j])
                states.append(grid["XS"][k, j])
                flags.append(False)
    else:
        elements["U"] = grid["U"]
        for k in range(N):
            times.append(t_nodes[k])
            states.append(grid["X"][k])
            flags.append(True)
    times.append(t_nodes[N])
    states.append(grid["X"][N])
    flags.append(True)
    states = np.asarray(states)
    times = np.asarray(times)

    curvilinear = None
    if curvi:
        s_nodes, s_stage = meta["s_nodes"], meta["s_stage"]
        if s_stage is not None:
            s_all = np.concatenate([np.column_stack([s_nodes[:-1], s_stage]).reshape(-1), s_nodes[-1:]])
        else:
            s_all = s_nodes
        f = frame_at(meta["track"].curve, s_all)
        y, n = states[:, 0], states[:, 1]
        pos = f.origin + y[:, None] * f.e_y + n[:, None] * f.e_n
        curvilinear = np.column_stack([s_all, y, n])
        states = np.column_stack([pos, states[:, 2:]])

    traj = Trajectory(
        times=times,
        states=states,
        inputs=np.zeros((len(times), model.n_u)),
        lap_time=float(t_nodes[-1]),
        formulation=meta["formulation"],
        scheme=scheme,
        model=model,
        is_boundary=np.asarray(flags),
        curvilinear=curvilinear,
        elements=elements,
        grid=grid,
        converged=converged,
    )
    traj.inputs = np.array([traj.input_at(t) for t in times])
    return traj


def transcription_report(problem: NlpProblem) -> str:
    """Element counts per phase, problem size and constraint families as key-value text."""
    meta = problem.metadata
    model, scheme, N = meta["model"], meta["scheme"], meta["N"]
    lines = [
        f"formulation: {meta['formulation']}",
        f"model: {model.kind}",
        f"scheme: {scheme.label}",
        f"elements: {N}",
    ]
    if meta["formulation"] == CURVILINEAR:
        nodes = sorted(k for k, _ in meta["gate_nodes"])
        if nodes:
            bounds = nodes + [nodes[0] + N]
            counts = [bounds[i + 1] - bounds[i] for i in range(len(nodes))]
        else:
            counts = [N]
    else:
        counts = [meta["K"]] * meta["G"]
    lines.append("elements_per_phase: " + " ".join(str(c) for c in counts))
    lines.append(f"variables: {problem.n_var}")
    lines.append(f"constraints: {problem.n_con}")
    for tag, count in sorted(problem.tag_counts().items()):
        lines.append(f"constraints.{tag}: {count}")
    return "\n".join(lines) + "\n"
