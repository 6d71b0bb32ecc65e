"""Vehicle models as seen by the transcription: state layout, bounds, dynamics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import casadi as ca
import numpy as np

from .. import dynamics as dyn
from ..dynamics import VehicleParams

POINT_MASS = "point_mass"
QUADROTOR = "quadrotor"
_ALIASES = {"point-mass": POINT_MASS, "pointmass": POINT_MASS, "drone": QUADROTOR}


def canonical_kind(kind: str) -> str:
    kind = _ALIASES.get(kind, kind)
    if kind not in (POINT_MASS, QUADROTOR):
        raise ValueError(f"unknown vehicle model {kind!r}")
    return kind


@dataclass(frozen=True)
class VehicleModel:
    """A vehicle as an ODE ``z_dot = f(z, u)`` plus input constraints.

    Global state layout: point mass ``(x, v)`` with 6 entries, quadrotor
    ``(x, q, v_b, omega_b)`` with 13.  ``radius`` is the collision sphere
    used to shrink gates.  ``max_speed`` optionally bounds the global speed;
    it is off by default.
    """

    kind: str = QUADROTOR
    params: VehicleParams = field(default_factory=VehicleParams)
    radius: float = 0.3
    max_speed: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if self.radius < 0:
            raise ValueError("vehicle radius must be non-negative")
        if self.max_speed is not None and self.max_speed <= 0:
            raise ValueError("max_speed must be positive")

    @property
    def is_quadrotor(self) -> bool:
        return self.kind == QUADROTOR

    @property
    def n_x(self) -> int:
        return 13 if self.is_quadrotor else 6

    @property
    def n_u(self) -> int:
        return 4 if self.is_quadrotor else 3

    @property
    def n_rest(self) -> int:
        """Entries of the state that are not position."""
        return self.n_x - 3

    def input_bounds(self) -> tuple:
        p = self.params
        if self.is_quadrotor:
            return np.full(4, p.t_min), np.full(4, p.max_rotor_thrust)
        f = p.max_total_thrust
        return np.full(3, -f), np.full(3, f)

    def project_input(self, u) -> np.ndarray:
        """Nearest admissible input: rotor thrusts clipped to their interval, point-mass thrust to its ball."""
        u = np.asarray(u, dtype=float)
        if self.is_quadrotor:
            lo, hi = self.input_bounds()
            return np.clip(u, lo, hi)
        norm = float(np.linalg.norm(u))
        limit = self.params.max_total_thrust
        return u * (limit / norm) if norm > limit else u

    def derivative(self, z, u):
        if self.is_quadrotor:
            return dyn.quadrotor_derivative(z, u, self.params)
        return dyn.point_mass_state_derivative(z, u, self.params)

    def rest_derivative(self, rest, u):
        """Derivative of the non-position part; position does not enter the dynamics."""
        z = ca.vertcat(ca.DM.zeros(3), rest) if isinstance(rest, (ca.SX, ca.MX)) else np.concatenate([np.zeros(3), rest])
        return self.derivative(z, u)[3:]

    def global_velocity(self, rest):
        """Global-frame velocity from the non-position part of the state."""
        if self.is_quadrotor:
            return dyn.body_to_global(rest[0:4], rest[4:7])
        return rest[0:3]

    def quaternion_slice(self, offset: int = 3) -> Optional[slice]:
        """Position of the quaternion inside a state vector whose non-position part starts at ``offset``."""
        return slice(offset, offset + 4) if self.is_quadrotor else None

    def path_constraints(self, u) -> list:
        """``(expr, lb, ub, tag)`` rows imposed wherever an input is defined."""
        if self.is_quadrotor:
            return []
        f = self.params.max_total_thrust
        return [(ca.dot(u, u), -np.inf, f * f, "thrust")]

    def speed_constraints(self, rest) -> list:
        if self.max_speed is None:
            return []
        v = self.global_velocity(rest)
        return [(ca.dot(v, v), -np.inf, self.max_speed**2, "speed")]

    def hover_input(self) -> np.ndarray:
        p = self.params
        if self.is_quadrotor:
            return np.full(4, p.hover_rotor_thrust)
        return np.array([0.0, 0.0, p.m * p.g])

    def rest_guess(self, velocity_global) -> np.ndarray:
        """Level attitude, given global velocity, zero rates."""
        v = np.asarray(velocity_global, dtype=float)
        if self.is_quadrotor:
            return np.concatenate([[1.0, 0.0, 0.0, 0.0], v, np.zeros(3)])
        return v.copy()
