"""Point-mass and quadrotor rigid-body models.

Quaternions are scalar-first Hamilton quaternions encoding the body-to-global
rotation R^gb.  Velocities are body-frame for the quadrotor; the point mass
uses the global frame as its body frame.  Every function accepts numpy
arrays or CasADi expressions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend as bk


@dataclass(frozen=True)
class VehicleParams:
    m: float = 1.0
    g: float = 9.81
    inertia: tuple = (1.0e-3, 1.0e-3, 1.7e-3)
    arm_length: float = 0.15
    drag_torque: float = 0.05
    twr: float = 3.3
    t_min: float = 0.2

    def __post_init__(self):
        positive = {"m": self.m, "g": self.g, "arm_length": self.arm_length,
                    "drag_torque": self.drag_torque, "twr": self.twr}
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"vehicle parameter {name} must be positive, got {value}")
        if len(self.inertia) != 3 or min(self.inertia) <= 0:
            raise ValueError("inertia must be three positive diagonal entries")
        if self.t_min < 0:
            raise ValueError("t_min must be non-negative")
        if self.t_min > self.max_rotor_thrust:
            raise ValueError("t_min exceeds the per-rotor thrust limit")

    @property
    def max_total_thrust(self) -> float:
        return self.twr * self.m * self.g

    @property
    def max_rotor_thrust(self) -> float:
        return self.max_total_thrust / 4.0

    @property
    def hover_rotor_thrust(self) -> float:
        return self.m * self.g / 4.0


@dataclass
class RigidBodyState:
    x_g: np.ndarray
    q: np.ndarray
    v_b: np.ndarray
    omega_b: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x_g, self.q, self.v_b, self.omega_b])

    @classmethod
    def from_vector(cls, z) -> "RigidBodyState":
        z = np.asarray(z, dtype=float)
        return cls(z[0:3], z[3:7], z[7:10], z[10:13])


@dataclass
class QuadrotorInput:
    thrusts: np.ndarray

    def within_bounds(self, params: VehicleParams, tol: float = 0.0) -> bool:
        t = np.asarray(self.thrusts)
        return bool(np.all(t >= params.t_min - tol) and np.all(t <= params.max_rotor_thrust + tol))


@dataclass
class PointMassInput:
    u: np.ndarray

    def within_bounds(self, params: VehicleParams, tol: float = 0.0) -> bool:
        return float(np.linalg.norm(self.u)) <= params.max_total_thrust + tol


@dataclass
class Wrench:
    F_b: object
    K_b: object


# --------------------------------------------------------------------------
# quaternion algebra


def quat_mul(p, q):
    pw, px, py, pz = bk.comps(p, 4)
    qw, qx, qy, qz = bk.comps(q, 4)
    return bk.vec(
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    )


def quat_conj(q):
    w, x, y, z = bk.comps(q, 4)
    return bk.vec(w, -x, -y, -z)


def rotation_rows(q):
    """Rows of R^gb for a (unit) quaternion."""
    w, x, y, z = bk.comps(q, 4)
    return (
        bk.vec(1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)),
        bk.vec(2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)),
        bk.vec(2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)),
    )


def rotation_matrix(q) -> np.ndarray:
    return np.stack([np.asarray(r) for r in rotation_rows(np.asarray(q, dtype=float))], axis=-2)


def body_to_global(q, v_b):
    return bk.matvec(rotation_rows(q), v_b)


def global_to_body(q, v_g):
    rows = rotation_rows(q)
    c0, c1, c2 = (bk.comps(r) for r in rows)
    cols = (bk.vec(c0[0], c1[0], c2[0]), bk.vec(c0[1], c1[1], c2[1]), bk.vec(c0[2], c1[2], c2[2]))
    return bk.matvec(cols, v_g)


def quaternion_rate(q, omega_b):
    """``q_dot = 1/2 q (x) (0, omega)`` for body-frame angular velocity."""
    wx, wy, wz = bk.comps(omega_b)
    qd = quat_mul(q, bk.vec(0.0 * wx, wx, wy, wz))
    return bk.vec(*(0.5 * c for c in bk.comps(qd, 4)))


def quat_from_two_vectors(a, b) -> np.ndarray:
    """Minimal rotation taking direction ``a`` onto direction ``b``."""
    a = np.asarray(a, dtype=float) / np.linalg.norm(a)
    b = np.asarray(b, dtype=float) / np.linalg.norm(b)
    c = float(np.dot(a, b))
    if c < -1.0 + 1e-12:
        # antiparallel: rotate by pi about any axis orthogonal to a
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(a, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return np.concatenate([[0.0], axis])
    q = np.concatenate([[1.0 + c], np.cross(a, b)])
    return q / np.linalg.norm(q)


# --------------------------------------------------------------------------
# models


def quadrotor_wrench(q, thrusts, params: VehicleParams) -> Wrench:
    """Net body force and moment from four rotor thrusts plus gravity."""
    t1, t2, t3, t4 = bk.comps(thrusts, 4)
    _, _, row3 = rotation_rows(q)
    gz = bk.comps(row3)  # components of global e3 along body axes
    mg = params.m * params.g
    F = bk.vec(-mg * gz[0], -mg * gz[1], t1 + t2 + t3 + t4 - mg * gz[2])
    K = bk.vec(
        (t1 + t2 - t3 - t4) * params.arm_length,
        (-t1 + t2 + t3 - t4) * params.arm_length,
        (t1 - t2 + t3 - t4) * params.drag_torque,
    )
    return Wrench(F, K)


def rigid_body_derivative(v_b, omega_b, wrench: Wrench, params: VehicleParams):
    """Body-frame Newton-Euler equations; returns ``(v_b_dot, omega_b_dot)``."""
    I = params.inertia
    v_dot = bk.sub(bk.scale(wrench.F_b, 1.0 / params.m), bk.cross(omega_b, v_b))
    w = bk.comps(omega_b)
    Iw = bk.vec(I[0] * w[0], I[1] * w[1], I[2] * w[2])
    rhs = bk.comps(bk.sub(wrench.K_b, bk.cross(omega_b, Iw)))
    w_dot = bk.vec(rhs[0] / I[0], rhs[1] / I[1], rhs[2] / I[2])
    return v_dot, w_dot


def point_mass_derivative(x, v, u, params: VehicleParams):
    """``x_dot = v``, ``v_dot = u/m - g e3`` in the global frame."""
    uc = bk.comps(u)
    v_dot = bk.vec(uc[0] / params.m, uc[1] / params.m, uc[2] / params.m - params.g)
    return v, v_dot


def quadrotor_derivative(z, thrusts, params: VehicleParams):
    """Time derivative of the 13-state ``(x_g, q, v_b, omega_b)`` vector."""
    x, q, v, w = _split_quadrotor(z)
    wrench = quadrotor_wrench(q, thrusts, params)
    v_dot, w_dot = rigid_body_derivative(v, w, wrench, params)
    return _join(body_to_global(q, v), quaternion_rate(q, w), v_dot, w_dot)


def point_mass_state_derivative(z, u, params: VehicleParams):
    x, v = _split(z, (3, 3))
    return _join(*point_mass_derivative(x, v, u, params))


def mechanical_energy(z_g_pos, v_global, params: VehicleParams, omega_b=None) -> float:
    """Translational kinetic plus potential energy, with rotational term if ``omega_b`` given."""
    e = 0.5 * params.m * float(np.dot(v_global, v_global)) + params.m * params.g * float(z_g_pos[2])
    if omega_b is not None:
        e += 0.5 * float(np.dot(np.asarray(params.inertia) * omega_b, omega_b))
    return e


def _split_quadrotor(z):
    return _split(z, (3, 4, 3, 3))


def _split(z, sizes):
    out, i = [], 0
    for k in sizes:
        out.append(z[i:i + k])
        i += k
    return out


def _join(*parts):
    if bk.is_symbolic(*parts):
        import casadi as ca
        return ca.vertcat(*parts)
    return np.concatenate([np.asarray(p, dtype=float).reshape(-1) for p in parts])


def rk4_step(f, z, h: float):
    k1 = f(z)
    k2 = f(z + 0.5 * h * k1)
    k3 = f(z + 0.5 * h * k2)
    k4 = f(z + h * k3)
    return z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
