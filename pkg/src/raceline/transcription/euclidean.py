"""Multiphase transcription in global coordinates.

Each gate closes a phase of ``K`` elements that share one duration.  The
lap starts and ends at the last gate, so periodicity ties the final
boundary state to the first.
"""

from __future__ import annotations

from typing import Optional

import casadi as ca
import numpy as np

from ..geometry import frame_at
from .layout import (
    EUCLIDEAN,
    GridGuess,
    Track,
    TranscriptionConfig,
    TranscriptionError,
    apply_guess,
    arc_length,
)
from .models import VehicleModel
from .nlp import NlpBuilder, NlpProblem
from .schemes import collocate_element, shoot_element_rk4


def phase_s_nodes(track: Track, K: int) -> np.ndarray:
    """Centerline parameter at each of the ``G*K + 1`` boundary nodes, for the initial guess."""
    period = track.period
    s_g = [g.s for g in track.gates]
    if any(s is None for s in s_g):
        raise TranscriptionError("every gate needs a centerline parameter for the initial guess")
    G = len(s_g)
    nodes = []
    start = s_g[-1] - period if G > 1 else s_g[0] - period
    for p in range(G):
        end = s_g[p]
        while end <= start:
            end += period
        nodes.extend(np.linspace(start, end, K + 1)[:-1])
        start = end
    nodes.append(start)
    return np.asarray(nodes)


def euclidean_guess(track: Track, model: VehicleModel, config: TranscriptionConfig) -> GridGuess:
    """States on the centerline at the guessed speed, hover inputs."""
    K, G = config.elements_per_phase, len(track.gates)
    N = G * K
    scheme = config.scheme
    s_nodes = phase_s_nodes(track, K)
    curve = track.curve

    def states(s):
        f = frame_at(curve, s)
        out = []
        for i in range(np.size(s)):
            v = config.speed_guess * np.atleast_2d(f.e_s)[i]
            out.append(np.concatenate([np.atleast_2d(f.origin)[i], model.rest_guess(v)]))
        return np.array(out)

    blocks = {"X": states(s_nodes)}
    H = np.array([
        arc_length(curve, s_nodes[p * K], s_nodes[(p + 1) * K]) / config.speed_guess / K for p in range(G)
    ])
    blocks["H"] = H
    if scheme.is_collocation:
        tau = scheme.coefficients.tau[1:]
        s_stage = s_nodes[:-1, None] + tau[None, :] * np.diff(s_nodes)[:, None]
        blocks["XS"] = states(s_stage.reshape(-1)).reshape(N, scheme.degree, model.n_x)
        blocks["US"] = np.tile(model.hover_input(), (N, scheme.degree, 1))
    else:
        blocks["U"] = np.tile(model.hover_input(), (N, 1))
    return GridGuess(blocks)


def build_euclidean_nlp(
    track: Track,
    model: VehicleModel,
    config: TranscriptionConfig = TranscriptionConfig(),
    guess: Optional[GridGuess] = None,
) -> NlpProblem:
    gates = track.gates
    if not gates:
        raise TranscriptionError("the Euclidean formulation needs at least one gate")
    for g in gates:
        g.effective_size(model.radius)
    G, K = len(gates), config.elements_per_phase
    N = G * K
    nx, nu = model.n_x, model.n_u
    scheme = config.scheme
    u_lb, u_ub = model.input_bounds()
    qs = model.quaternion_slice()

    b = NlpBuilder()
    H = b.variable("H", G, lb=config.min_duration, ub=config.max_duration)
    X = b.variable("X", (N + 1) * nx)
    Xk = [X[k * nx:(k + 1) * nx] for k in range(N + 1)]
    if scheme.is_collocation:
        d = scheme.degree
        XS = b.variable("XS", N * d * nx)
        US = b.variable("US", N * d * nu, lb=np.tile(u_lb, N * d), ub=np.tile(u_ub, N * d))
    else:
        U = b.variable("U", N * nu, lb=np.tile(u_lb, N), ub=np.tile(u_ub, N))
    apply_guess(b, guess if guess is not None else euclidean_guess(track, model, config))

    for k in range(N):
        h = H[k // K]
        if scheme.is_collocation:
            xs = [XS[(k * d + j) * nx:(k * d + j + 1) * nx] for j in range(d)]
            us = [US[(k * d + j) * nu:(k * d + j + 1) * nu] for j in range(d)]
            defects, x_end = collocate_element(
                lambda j, x, us=us: model.derivative(x, us[j]), Xk[k], xs, h, scheme
            )
            for j in range(d):
                b.equal(defects[j], "dynamics")
                for expr, lo, hi, tag in model.path_constraints(us[j]) + model.speed_constraints(xs[j][3:]):
                    b.constrain(expr, lo, hi, tag)
        else:
            u = U[k * nu:(k + 1) * nu]
            x_end = shoot_element_rk4(model.derivative, Xk[k], u, h, scheme.substeps)
            for expr, lo, hi, tag in model.path_constraints(u) + model.speed_constraints(Xk[k][3:]):
                b.constrain(expr, lo, hi, tag)
        _continuity(b, Xk[k + 1], x_end, qs)

    for p, gate in enumerate(gates):
        x = Xk[(p + 1) * K]
        vel = model.global_velocity(x[3:]) if config.passage_direction else None
        for expr, lo, hi, tag in gate.euclidean_rows(x[0:3], model.radius, vel):
            b.constrain(expr, lo, hi, tag)

    b.equal(Xk[N] - Xk[0], "periodicity")
    objective = K * ca.sum1(H)
    meta = {
        "formulation": EUCLIDEAN,
        "model": model,
        "scheme": scheme,
        "N": N,
        "K": K,
        "G": G,
        "nw": nx,
        "gate_nodes": [(p + 1) * K for p in range(G)],
        "track": track,
        "config": config,
    }
    return b.build(objective, meta)


def _continuity(b: NlpBuilder, x_next, x_end, qs) -> None:
    """Match the next boundary state, projecting the quaternion to unit norm."""
    if qs is None:
        b.equal(x_next - x_end, "continuity")
        return
    q_end = x_end[qs]
    b.equal(x_next[0:qs.start] - x_end[0:qs.start], "continuity")
    b.equal(x_next[qs] - q_end / ca.norm_2(q_end), "quat_projection")
    b.equal(x_next[qs.stop:] - x_end[qs.stop:], "continuity")
