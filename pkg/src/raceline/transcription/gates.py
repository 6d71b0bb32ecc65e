"""Planar convex gates and their constraint rows."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import casadi as ca
import numpy as np

from ..geometry import FrameSample


class GateError(ValueError):
    pass


@dataclass
class Gate:
    """A circle or rectangle the vehicle center must pass through.

    ``normal`` is the passage direction.  Rectangle axes are ``axis_u``
    (half-width) and ``axis_v`` (half-height); ``up`` fixes their
    orientation and defaults to global z.  ``s`` is the gate location on
    the centerline, needed by the curvilinear formulation.
    """

    center: np.ndarray
    normal: np.ndarray
    shape: str = "circle"
    radius: float = 0.6
    half_width: float = 1.25
    half_height: float = 1.25
    up: Optional[np.ndarray] = None
    s: Optional[float] = None
    index: int = 0
    name: str = ""

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        n = np.asarray(self.normal, dtype=float)
        if np.linalg.norm(n) < 1e-12:
            raise GateError(f"gate {self.label}: zero normal")
        self.normal = n / np.linalg.norm(n)
        if self.shape not in ("circle", "rectangle"):
            raise GateError(f"gate {self.label}: unknown shape {self.shape!r}")
        dims = (self.radius,) if self.shape == "circle" else (self.half_width, self.half_height)
        if min(dims) <= 0:
            raise GateError(f"gate {self.label}: dimensions must be positive")

    @property
    def label(self) -> str:
        return self.name or f"#{self.index}"

    def axes(self) -> tuple:
        """Orthonormal in-plane axes ``(axis_u, axis_v)``."""
        up = np.array([0.0, 0.0, 1.0]) if self.up is None else np.asarray(self.up, dtype=float)
        v = up - np.dot(up, self.normal) * self.normal
        if np.linalg.norm(v) < 1e-6:
            v = np.array([1.0, 0.0, 0.0]) - self.normal[0] * self.normal
        v /= np.linalg.norm(v)
        u = np.cross(v, self.normal)
        return u, v

    def effective_size(self, vehicle_radius: float) -> tuple:
        """Gate dimensions shrunk by the vehicle radius; raises if nothing is left."""
        if self.shape == "circle":
            dims = (self.radius - vehicle_radius,)
        else:
            dims = (self.half_width - vehicle_radius, self.half_height - vehicle_radius)
        if min(dims) <= 0:
            raise GateError(
                f"gate {self.label}: size does not exceed vehicle radius {vehicle_radius}"
            )
        return dims

    def violation(self, p, vehicle_radius: float) -> float:
        """Distance outside the shrunk shape for a point already in the gate plane."""
        d = np.asarray(p, dtype=float) - self.center
        a, b = self.axes()
        u, v = float(d @ a), float(d @ b)
        dims = self.effective_size(vehicle_radius)
        if self.shape == "circle":
            return max(0.0, float(np.hypot(u, v)) - dims[0])
        return max(0.0, abs(u) - dims[0], abs(v) - dims[1])

    def euclidean_rows(self, p, vehicle_radius: float, velocity=None) -> list:
        """Constraint rows ``(expr, lb, ub, tag)`` on a global position ``p``."""
        c = ca.DM(self.center)
        d = p - c
        a, b = (ca.DM(x) for x in self.axes())
        rows = [(ca.dot(d, ca.DM(self.normal)), 0.0, 0.0, "gate_plane")]
        rows += self._shape_rows(ca.dot(d, a), ca.dot(d, b), vehicle_radius)
        if velocity is not None:
            rows.append((ca.dot(velocity, ca.DM(self.normal)), 0.0, np.inf, "gate_direction"))
        return rows

    def curvilinear_rows(self, frame: FrameSample, y, n, vehicle_radius: float, velocity=None) -> list:
        """Rows on ``(y, n)`` in the cross-section plane at ``frame.s``.

        The gate shape is mapped affinely onto the cross-section, so it
        stays convex as long as the map is invertible.
        """
        a, b = self.axes()
        m = np.array([[a @ frame.e_y, a @ frame.e_n], [b @ frame.e_y, b @ frame.e_n]])
        if abs(np.linalg.det(m)) < 1e-6:
            raise GateError(
                f"gate {self.label}: cross-section plane at s={float(frame.s):.6g} is edge-on to the gate"
            )
        off = np.asarray(frame.origin) - self.center
        u = float(off @ a) + m[0, 0] * y + m[0, 1] * n
        v = float(off @ b) + m[1, 0] * y + m[1, 1] * n
        rows = self._shape_rows(u, v, vehicle_radius)
        if velocity is not None:
            rows.append((ca.dot(velocity, ca.DM(self.normal)), 0.0, np.inf, "gate_direction"))
        return rows

    def _shape_rows(self, u, v, vehicle_radius):
        dims = self.effective_size(vehicle_radius)
        if self.shape == "circle":
            return [(u * u + v * v, -np.inf, dims[0] ** 2, "gate")]
        return [(u, -dims[0], dims[0], "gate"), (v, -dims[1], dims[1], "gate")]
