"""Transcription in curvilinear coordinates ``(s, y, n)`` along a centerline.

Element boundaries sit at fixed ``s``.  With collocation, stage points also
sit at fixed ``s`` (``s_k + tau_j * ds``): the element is integrated in
``s`` with ``sigma = dt/ds`` as a stage variable, so every frame quantity
is a numeric constant and the element duration is the quadrature of
``sigma``.  With RK4 shooting, ``s`` is an ordinary state integrated in
time and the frame is evaluated symbolically inside the element.
"""

from __future__ import annotations

from typing import Optional

import casadi as ca
import numpy as np

from ..geometry import frame_at, regularity_margin, symbolic_frame
from .euclidean import _continuity
from .layout import (
    CURVILINEAR,
    GridGuess,
    Track,
    TranscriptionConfig,
    TranscriptionError,
    apply_guess,
)
from .models import VehicleModel
from .nlp import NlpBuilder, NlpProblem
from .schemes import collocate_element, shoot_element_rk4

GRID_TOL = 1e-9


def curvilinear_grid(track: Track, config: TranscriptionConfig) -> tuple:
    """``(s_nodes, s_stage)``: boundary parameters (N+1,) and stage parameters (N, d) or ``None``."""
    N = config.curvilinear_elements(len(track.gates))
    s0 = track.s_start
    s_nodes = s0 + track.period * np.arange(N + 1) / N
    if config.scheme.is_collocation:
        tau = config.scheme.coefficients.tau[1:]
        s_stage = s_nodes[:-1, None] + tau[None, :] * (s_nodes[1] - s_nodes[0])
        return s_nodes, s_stage
    return s_nodes, None


def corridor_grid(track: Track, config: TranscriptionConfig) -> np.ndarray:
    """Parameters at which corridor rings are imposed, in constraint order.

    Collocation: every element boundary followed by its stages, ``N*(d+1)``
    values.  Shooting: the ``N`` element boundaries.
    """
    s_nodes, s_stage = curvilinear_grid(track, config)
    if s_stage is None:
        return s_nodes[:-1].copy()
    return np.column_stack([s_nodes[:-1], s_stage]).reshape(-1)


def locate_gate(gate, s_nodes: np.ndarray, period: float, s0: float) -> tuple:
    """``(k, tau)`` of a gate in the grid; ``tau == 0`` when it lies on a boundary."""
    if gate.s is None:
        raise TranscriptionError(f"gate {gate.label} has no centerline parameter")
    N = len(s_nodes) - 1
    ds = s_nodes[1] - s_nodes[0]
    x = ((gate.s - s0) % period) / ds
    k = int(np.floor(x + GRID_TOL))
    tau = x - k
    if abs(tau) < GRID_TOL:
        tau = 0.0
    return k % N, tau


def curvilinear_guess(track: Track, model: VehicleModel, config: TranscriptionConfig) -> GridGuess:
    curve = track.curve
    s_nodes, s_stage = curvilinear_grid(track, config)
    N = len(s_nodes) - 1
    ds = s_nodes[1] - s_nodes[0]
    v0 = config.speed_guess

    def states(s):
        f = frame_at(curve, np.atleast_1d(s))
        return np.array([np.concatenate([[0.0, 0.0], model.rest_guess(v0 * e)]) for e in f.e_s])

    f_nodes = frame_at(curve, s_nodes)
    blocks = {"X": states(s_nodes)}
    if s_stage is not None:
        d = s_stage.shape[1]
        blocks["XS"] = states(s_stage.reshape(-1)).reshape(N, d, -1)
        blocks["US"] = np.tile(model.hover_input(), (N, d, 1))
        sig = frame_at(curve, s_stage.reshape(-1)).speed_factor.reshape(N, d) / v0
        blocks["SIG"] = sig
        blocks["H"] = ds * sig @ config.scheme.coefficients.B
    else:
        blocks["U"] = np.tile(model.hover_input(), (N, 1))
        g = f_nodes.speed_factor
        blocks["H"] = ds * 0.5 * (g[:-1] + g[1:]) / v0
    return GridGuess(blocks)


def build_curvilinear_nlp(
    track: Track,
    model: VehicleModel,
    config: TranscriptionConfig = TranscriptionConfig(),
    guess: Optional[GridGuess] = None,
    corridor=None,
) -> NlpProblem:
    curve = track.curve
    period = track.period
    for g in track.gates:
        g.effective_size(model.radius)
    s_nodes, s_stage = curvilinear_grid(track, config)
    N = len(s_nodes) - 1
    ds = float(s_nodes[1] - s_nodes[0])
    scheme = config.scheme
    nw, nu = model.n_x - 1, model.n_u
    u_lb, u_ub = model.input_bounds()
    qs = model.quaternion_slice(offset=2)
    lam = config.lam

    ring_s = corridor_grid(track, config)
    if corridor is not None and len(corridor) != len(ring_s):
        raise TranscriptionError(
            f"corridor has {len(corridor)} rings, transcription grid needs {len(ring_s)}"
        )

    gate_slots = []
    for g in track.gates:
        k, tau = locate_gate(g, s_nodes, period, track.s_start)
        if tau != 0.0 and not (config.gate_interpolation and scheme.is_collocation):
            raise TranscriptionError(
                f"gate {g.label} at s={g.s:.6g} is not on the element grid; enable gate interpolation "
                "(collocation only) or choose an element count that places gates on boundaries"
            )
        gate_slots.append((g, k, tau))

    b = NlpBuilder()
    H = b.variable("H", N, lb=config.min_duration, ub=config.max_duration)
    X = b.variable("X", (N + 1) * nw)
    Xk = [X[k * nw:(k + 1) * nw] for k in range(N + 1)]
    f_nodes = frame_at(curve, s_nodes)

    if scheme.is_collocation:
        co = scheme.coefficients
        d = scheme.degree
        XS = b.variable("XS", N * d * nw)
        US = b.variable("US", N * d * nu, lb=np.tile(u_lb, N * d), ub=np.tile(u_ub, N * d))
        SIG = b.variable("SIG", N * d, lb=config.min_sigma, ub=np.inf)
        f_stage = frame_at(curve, s_stage.reshape(-1))
    else:
        U = b.variable("U", N * nu, lb=np.tile(u_lb, N), ub=np.tile(u_ub, N))
    apply_guess(b, guess if guess is not None else curvilinear_guess(track, model, config))

    ring_i = 0

    def ring(y, n):
        nonlocal ring_i
        if corridor is not None:
            r = corridor[ring_i]
            yc, nc = r.center_yn
            b.constrain((y - yc) ** 2 + (n - nc) ** 2, -np.inf, r.radius**2, "corridor")
        ring_i += 1

    for k in range(N):
        fk = f_nodes[k]
        b.constrain(regularity_margin(fk, Xk[k][0], Xk[k][1]), -np.inf, lam, "regularity")
        ring(Xk[k][0], Xk[k][1])
        if scheme.is_collocation:
            ws = [XS[(k * d + j) * nw:(k * d + j + 1) * nw] for j in range(d)]
            us = [US[(k * d + j) * nu:(k * d + j + 1) * nu] for j in range(d)]
            sig = [SIG[k * d + j] for j in range(d)]
            frames = [f_stage[k * d + j] for j in range(d)]

            def spatial_rhs(j, w, frames=frames, us=us, sig=sig):
                return _spatial_derivative(model, frames[j], w, us[j], sig[j])

            defects, w_end = collocate_element(spatial_rhs, Xk[k], ws, ds, scheme)
            for j in range(d):
                w, f = ws[j], frames[j]
                b.equal(defects[j], "dynamics")
                v = model.global_velocity(w[2:])
                margin = regularity_margin(f, w[0], w[1])
                b.equal(sig[j] * ca.dot(v, ca.DM(f.e_s)) - (1.0 - margin) * f.speed_factor, "progress")
                b.constrain(margin, -np.inf, lam, "regularity")
                ring(w[0], w[1])
                for expr, lo, hi, tag in model.path_constraints(us[j]) + model.speed_constraints(w[2:]):
                    b.constrain(expr, lo, hi, tag)
            b.equal(H[k] - ds * sum(co.B[j] * sig[j] for j in range(d)), "duration")
        else:
            u = U[k * nu:(k + 1) * nu]
            anchor = 0.5 * (s_nodes[k] + s_nodes[k + 1])

            def time_rhs(z, u_, anchor=anchor):
                return _time_derivative(model, curve, z, u_, anchor)

            z0 = ca.vertcat(s_nodes[k], Xk[k])
            z_end = shoot_element_rk4(time_rhs, z0, u, H[k], scheme.substeps)
            b.equal(z_end[0] - s_nodes[k + 1], "progress")
            w_end = z_end[1:]
            for expr, lo, hi, tag in model.path_constraints(u) + model.speed_constraints(Xk[k][2:]):
                b.constrain(expr, lo, hi, tag)
        _continuity(b, Xk[k + 1], w_end, qs)

    gate_nodes = []
    for g, k, tau in gate_slots:
        if tau == 0.0:
            w, f = Xk[k], f_nodes[k]
        else:
            basis = co.basis(tau)
            pts = [Xk[k]] + [XS[(k * d + j) * nw:(k * d + j + 1) * nw] for j in range(d)]
            w = sum(basis[r] * pts[r] for r in range(d + 1))
            f = frame_at(curve, g.s)
        vel = model.global_velocity(w[2:]) if config.passage_direction else None
        for expr, lo, hi, tag in g.curvilinear_rows(f, w[0], w[1], model.radius, vel):
            b.constrain(expr, lo, hi, tag)
        gate_nodes.append((k, tau))

    b.equal(Xk[N] - Xk[0], "periodicity")
    meta = {
        "formulation": CURVILINEAR,
        "model": model,
        "scheme": scheme,
        "N": N,
        "nw": nw,
        "ds": ds,
        "s_nodes": s_nodes,
        "s_stage": s_stage,
        "ring_s": ring_s,
        "gate_nodes": gate_nodes,
        "track": track,
        "config": config,
        "corridor": corridor,
    }
    return b.build(ca.sum1(H), meta)


def _frame_components(model: VehicleModel, f, w):
    v = model.global_velocity(w[2:])
    e_s, e_y, e_n = (ca.DM(e) if isinstance(e, np.ndarray) else e for e in (f.e_s, f.e_y, f.e_n))
    return ca.dot(v, e_s), ca.dot(v, e_y), ca.dot(v, e_n)


def _spatial_derivative(model: VehicleModel, f, w, u, sigma):
    """``dw/ds`` for ``w = (y, n, rest)`` at a fixed-``s`` stage."""
    y, n = w[0], w[1]
    _, v_y, v_n = _frame_components(model, f, w)
    turn = f.kappa_s * f.speed_factor
    dy = sigma * v_y + n * turn
    dn = sigma * v_n - y * turn
    return ca.vertcat(dy, dn, sigma * model.rest_derivative(w[2:], u))


def _time_derivative(model: VehicleModel, curve, z, u, anchor: float):
    """``dz/dt`` for ``z = (s, y, n, rest)`` with the frame evaluated at symbolic ``s``."""
    s, w = z[0], z[1:]
    f = symbolic_frame(curve, s, anchor)
    y, n = w[0], w[1]
    v_s, v_y, v_n = _frame_components(model, f, w)
    den = 1.0 - regularity_margin(f, y, n)
    s_dot = v_s / (den * f.speed_factor)
    turn = f.kappa_s * f.speed_factor * s_dot
    return ca.vertcat(s_dot, v_y + n * turn, v_n - y * turn, model.rest_derivative(w[2:], u))
