"""Time-stamped raceline samples with input and state interpolation."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as npp
from scipy.optimize import brentq

from .transcription.layout import CURVILINEAR, GridGuess
from .transcription.models import VehicleModel
from .transcription.schemes import CollocationScheme


@dataclass
class Trajectory:
    """One lap of a raceline.

    ``states`` use the global layout of the model (point mass: position and
    velocity; quadrotor: position, quaternion, body velocity, body rates).
    ``elements`` holds per-element data for interpolation: start times
    ``t`` (N+1,), and either ``US`` stage inputs (N, d, nu) or ``U``
    element inputs (N, nu); spatial collocation also stores ``SIG`` and
    ``ds`` to map time back to the element coordinate.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    lap_time: float
    formulation: str
    scheme: CollocationScheme
    model: VehicleModel
    is_boundary: np.ndarray
    curvilinear: Optional[np.ndarray] = None
    elements: dict = field(default_factory=dict)
    grid: Optional[GridGuess] = None
    converged: bool = True

    def __post_init__(self):
        # a failed solve may leave non-monotone times; keep it for diagnostics
        if self.converged and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, 0:3]

    @property
    def boundary_states(self) -> np.ndarray:
        return self.states[self.is_boundary]

    @property
    def n_elements(self) -> int:
        return len(self.elements["t"]) - 1

    def global_velocities(self) -> np.ndarray:
        if not self.model.is_quadrotor:
            return self.states[:, 3:6]
        from .dynamics import rotation_matrix
        R = rotation_matrix(self.states[:, 3:7] / np.linalg.norm(self.states[:, 3:7], axis=1, keepdims=True))
        return np.einsum("nij,nj->ni", R, self.states[:, 7:10])

    def element_coordinate(self, t: float) -> tuple:
        """``(k, tau)`` of time ``t`` within the element grid."""
        te = self.elements["t"]
        t = float(np.clip(t, te[0], te[-1]))
        k = int(np.clip(np.searchsorted(te, t, side="right") - 1, 0, len(te) - 2))
        dt = t - te[k]
        if "SIG" not in self.elements:
            return k, dt / (te[k + 1] - te[k])
        poly = self._time_polynomial(k)
        if dt <= 0.0:
            return k, 0.0
        if npp.polyval(1.0, poly) <= dt:
            return k, 1.0
        return k, brentq(lambda tau: npp.polyval(tau, poly) - dt, 0.0, 1.0, xtol=1e-14)

    def _time_polynomial(self, k: int) -> np.ndarray:
        """Coefficients of elapsed time within element ``k`` as a polynomial of ``tau``."""
        co = self.scheme.coefficients
        sig = np.asarray(self.elements["SIG"][k])
        coef = np.zeros(co.degree + 1)
        for i in range(co.degree):
            others = np.delete(co.tau[1:], i)
            li = npp.polyfromroots(others) / np.prod(co.tau[1 + i] - others)
            coef[: co.degree + 1] += sig[i] * npp.polyint(li)
        return self.elements["ds"] * coef

    def input_at(self, t: float) -> np.ndarray:
        """Input at time ``t``.

        Collocation fixes the input only at the stage points.  In between,
        the polynomial through the stage inputs is used, projected onto the
        admissible set because near the element ends it extrapolates and
        can leave the thrust limits.
        """
        k, tau = self.element_coordinate(t)
        if "U" in self.elements:
            return np.asarray(self.elements["U"][k], dtype=float)
        basis = self.scheme.coefficients.stage_basis(tau)
        return self.model.project_input(basis @ np.asarray(self.elements["US"][k]))

    def to_csv(self) -> str:
        """Delimited text, one row per sample, header first."""
        quad = self.model.is_quadrotor
        cols = ["t", "x", "y", "z", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "wx", "wy", "wz"]
        cols += ["T1", "T2", "T3", "T4"] if quad else ["ux", "uy", "uz"]
        out = io.StringIO()
        out.write(",".join(cols) + "\n")
        for i, t in enumerate(self.times):
            z, u = self.states[i], self.inputs[i]
            if quad:
                vals = [t, *z[0:3], *z[3:7], *z[7:10], *z[10:13]]
                cells = [_fmt(v) for v in vals]
            else:
                cells = [_fmt(t), *(_fmt(v) for v in z[0:3]), "", "", "", "", *(_fmt(v) for v in z[3:6]), "", "", ""]
            cells += [_fmt(v) for v in u]
            out.write(",".join(cells) + "\n")
        return out.getvalue()

    @property
    def is_curvilinear(self) -> bool:
        return self.formulation == CURVILINEAR


def _fmt(v) -> str:
    return f"{float(v):.12g}"
