"""Moving frame along a centerline curve.

A centerline ``x^c(s)`` and a reference direction ``r^c(s)`` define an
orthonormal frame ``(e_s, e_y, e_n)``.  The parameter ``s`` need not be arc
length; every rate below carries the speed factor ``|x^c_s|``.  Lateral
offsets ``(y, n)`` locate points in the plane normal to the tangent:

    x = x^c(s) + y e_y(s) + n e_n(s)

Curvatures follow the Darboux convention (per unit arc length):

    d e_s / ds = ( k_n e_y + k_y e_n) |x^c_s|
    d e_y / ds = ( k_s e_n - k_n e_s) |x^c_s|
    d e_n / ds = (-k_y e_s - k_s e_y) |x^c_s|
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import casadi as ca
import numpy as np
from scipy.interpolate import CubicSpline

from . import _backend as bk

PATHOLOGICAL_CONDITION = 1e8
SINGULAR_MARGIN_TOL = 1e-9


class GeometryError(ValueError):
    """Base class for invalid curve or frame queries."""


class InsufficientWaypointsError(GeometryError):
    pass


class PathologicalFrameError(GeometryError):
    pass


class KinematicSingularityError(GeometryError):
    pass


class OutsideRegularNeighborhoodError(GeometryError):
    pass


class ProjectionError(GeometryError):
    pass


@dataclass(frozen=True)
class GeometryConfig:
    lam: float = 0.9
    projection_tolerance: float = 1e-10
    projection_max_iter: int = 50

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"regularity bound must lie in (0, 1), got {self.lam}")
        if self.projection_tolerance <= 0 or self.projection_max_iter < 1:
            raise ValueError("projection tolerance and iteration limit must be positive")


@dataclass
class FrameSample:
    """Frame, curvatures and speed factor at one or many parameter values.

    Vector fields have shape ``(3,)`` for a scalar ``s`` and ``(n, 3)`` for an
    array of ``n`` parameters.  Symbolic samples hold CasADi expressions.
    """

    s: object
    origin: object
    e_s: object
    e_y: object
    e_n: object
    kappa_s: object
    kappa_y: object
    kappa_n: object
    speed_factor: object

    def rotation(self) -> np.ndarray:
        """R^gc with columns (e_s, e_y, e_n)."""
        return np.stack([self.e_s, self.e_y, self.e_n], axis=-1)

    def __getitem__(self, i) -> "FrameSample":
        return FrameSample(*(np.asarray(getattr(self, f))[i] for f in _FRAME_FIELDS))

    def __len__(self) -> int:
        return int(np.size(self.s))


_FRAME_FIELDS = ("s", "origin", "e_s", "e_y", "e_n", "kappa_s", "kappa_y", "kappa_n", "speed_factor")


@dataclass
class CurvilinearState:
    s: float
    y: float
    n: float
    s_dot: Optional[float] = None
    y_dot: Optional[float] = None
    n_dot: Optional[float] = None


# --------------------------------------------------------------------------
# curves


class ParametricCurve:
    """Centerline and reference-direction pair evaluated with derivatives.

    ``period`` is the span of ``s`` after which frame quantities repeat
    (``None`` for an unbounded parameter).  ``closed`` says whether the
    centerline position itself repeats; a straight corridor wraps its
    frame but not its position.
    """

    period: Optional[float] = None
    closed: bool = True

    def wrap(self, s):
        if self.period is None:
            return s
        return np.mod(s, self.period)

    def center(self, s, der: int = 0) -> np.ndarray:
        raise NotImplementedError

    def reference(self, s, der: int = 0) -> np.ndarray:
        raise NotImplementedError

    def symbolic(self, s, anchor: float):
        """Return ``(x^c, x^c_s, x^c_ss, r^c, r^c_s)`` as CasADi expressions of ``s``.

        The expressions are exact on the smooth piece containing ``anchor``.
        """
        raise NotImplementedError


class SplineCurve(ParametricCurve):
    """Periodic cubic spline pair; ``s`` runs over ``[knots[0], knots[-1])``."""

    def __init__(self, knots: np.ndarray, center_values: np.ndarray, reference_values: np.ndarray):
        self.knots = np.asarray(knots, dtype=float)
        self._x = CubicSpline(self.knots, center_values, bc_type="periodic")
        self._r = CubicSpline(self.knots, reference_values, bc_type="periodic")
        self.period = float(self.knots[-1] - self.knots[0])
        self.closed = True

    @property
    def center_coeffs(self) -> np.ndarray:
        return self._x.c

    @property
    def reference_coeffs(self) -> np.ndarray:
        return self._r.c

    def wrap(self, s):
        return self.knots[0] + np.mod(np.asarray(s, dtype=float) - self.knots[0], self.period)

    def center(self, s, der: int = 0):
        return self._x(self.wrap(s), der)

    def reference(self, s, der: int = 0):
        return self._r(self.wrap(s), der)

    def segment_index(self, s: float) -> int:
        i = int(np.searchsorted(self.knots, self.wrap(s), side="right")) - 1
        return min(max(i, 0), len(self.knots) - 2)

    def symbolic(self, s, anchor: float):
        i = self.segment_index(anchor)
        # shift so that the anchor's period copy maps onto segment i
        offset = float(anchor - self.wrap(anchor)) + self.knots[i]
        ds = s - offset
        return (
            _poly3(self._x.c[:, i, :], ds, 0),
            _poly3(self._x.c[:, i, :], ds, 1),
            _poly3(self._x.c[:, i, :], ds, 2),
            _poly3(self._r.c[:, i, :], ds, 0),
            _poly3(self._r.c[:, i, :], ds, 1),
        )


def _poly3(c: np.ndarray, ds, der: int):
    # c has shape (4, 3): highest power first, one column per axis
    out = []
    for k in range(3):
        a3, a2, a1, a0 = (float(v) for v in c[:, k])
        if der == 0:
            out.append(((a3 * ds + a2) * ds + a1) * ds + a0)
        elif der == 1:
            out.append((3 * a3 * ds + 2 * a2) * ds + a1)
        else:
            out.append(6 * a3 * ds + 2 * a2)
    return ca.vertcat(*out)


class StraightCurve(ParametricCurve):
    """Straight centerline ``origin + s * direction`` with a constant reference.

    With a finite ``period`` the frame wraps like a torus while the position
    keeps translating, which models an endless straight corridor.
    """

    def __init__(self, origin, direction, reference, period: Optional[float] = None):
        self.origin = np.asarray(origin, dtype=float)
        self.direction = np.asarray(direction, dtype=float)
        self.ref = np.asarray(reference, dtype=float)
        self.period = period
        self.closed = False

    def center(self, s, der: int = 0):
        s = np.asarray(s, dtype=float)
        if der == 0:
            return self.origin + s[..., None] * self.direction
        if der == 1:
            return np.broadcast_to(self.direction, s.shape + (3,)).copy()
        return np.zeros(s.shape + (3,))

    def reference(self, s, der: int = 0):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(self.ref if der == 0 else np.zeros(3), s.shape + (3,)).copy()

    def symbolic(self, s, anchor: float):
        z = ca.DM.zeros(3)
        return (ca.DM(self.origin) + s * ca.DM(self.direction), ca.DM(self.direction), z, ca.DM(self.ref), z)


class AnalyticCurve(ParametricCurve):
    """Curve given by closed-form callables.

    ``center_fn(s) -> (x, x_s, x_ss)`` and ``reference_fn(s) -> (r, r_s)``
    must accept arrays of ``s`` and return arrays with a trailing axis of 3.
    Callables written with :mod:`raceline._backend` also accept CasADi symbols.
    """

    def __init__(self, center_fn: Callable, reference_fn: Callable, period: Optional[float] = None, closed: bool = True):
        self.center_fn = center_fn
        self.reference_fn = reference_fn
        self.period = period
        self.closed = closed

    def center(self, s, der: int = 0):
        return np.asarray(self.center_fn(np.asarray(s, dtype=float))[der], dtype=float)

    def reference(self, s, der: int = 0):
        return np.asarray(self.reference_fn(np.asarray(s, dtype=float))[der], dtype=float)

    def symbolic(self, s, anchor: float):
        x, xs, xss = self.center_fn(s)
        r, rs = self.reference_fn(s)
        return x, xs, xss, r, rs


def line_curve(direction=(1.0, 0.0, 0.0), reference=(0.0, 1.0, 0.0), origin=(0.0, 0.0, 0.0), period=None) -> StraightCurve:
    return StraightCurve(origin, direction, reference, period)


def circle_curve(radius: float, center=(0.0, 0.0, 0.0), scale: float = 1.0) -> AnalyticCurve:
    """Horizontal counter-clockwise circle, ``s`` in radians times ``1/scale``, radial reference."""
    c = np.asarray(center, dtype=float)

    def center_fn(s):
        a = scale * s
        ca_, sa = bk.cos(a), bk.sin(a)
        zero = 0.0 * a
        return (
            bk.vec(c[0] + radius * ca_, c[1] + radius * sa, c[2] + zero),
            bk.vec(-radius * scale * sa, radius * scale * ca_, zero),
            bk.vec(-radius * scale**2 * ca_, -radius * scale**2 * sa, zero),
        )

    def reference_fn(s):
        a = scale * s
        ca_, sa = bk.cos(a), bk.sin(a)
        zero = 0.0 * a
        return bk.vec(ca_, sa, zero), bk.vec(-scale * sa, scale * ca_, zero)

    return AnalyticCurve(center_fn, reference_fn, period=2 * math.pi / scale)


def helix_curve(radius: float = 1.0, pitch: float = 0.5) -> AnalyticCurve:
    """Helix ``(R cos s, R sin s, pitch s)`` with horizontal radial reference."""

    def center_fn(s):
        cs, sn = bk.cos(s), bk.sin(s)
        zero = 0.0 * s
        return (
            bk.vec(radius * cs, radius * sn, pitch * s),
            bk.vec(-radius * sn, radius * cs, pitch + zero),
            bk.vec(-radius * cs, -radius * sn, zero),
        )

    def reference_fn(s):
        cs, sn = bk.cos(s), bk.sin(s)
        zero = 0.0 * s
        return bk.vec(cs, sn, zero), bk.vec(-sn, cs, zero)

    return AnalyticCurve(center_fn, reference_fn, period=None, closed=False)


def fit_periodic_curve(center_waypoints: Sequence, reference_waypoints: Sequence, knot_spacing: str = "index") -> SplineCurve:
    """Fit a closed periodic cubic spline through waypoints.

    With ``knot_spacing="index"`` waypoint ``k`` sits at ``s = k`` and the
    period equals the number of waypoints.  ``"chord"`` spaces knots by
    chord length instead.  The first waypoint is repeated internally to
    close the loop; do not repeat it in the input.
    """
    pts = np.asarray(center_waypoints, dtype=float)
    refs = np.asarray(reference_waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise GeometryError("center waypoints must have shape (N, 3)")
    if len(pts) < 3:
        raise InsufficientWaypointsError(f"insufficient waypoints: need at least 3, got {len(pts)}")
    if refs.shape != pts.shape:
        raise GeometryError("reference waypoints must match center waypoints in shape")
    ref_norms = np.linalg.norm(refs, axis=1)
    if np.any(ref_norms < 1e-12):
        k = int(np.argmin(ref_norms))
        raise GeometryError(f"zero reference vector at waypoint {k}")

    closed_pts = np.vstack([pts, pts[:1]])
    closed_refs = np.vstack([refs, refs[:1]])
    if knot_spacing == "index":
        knots = np.arange(len(closed_pts), dtype=float)
    elif knot_spacing == "chord":
        chords = np.linalg.norm(np.diff(closed_pts, axis=0), axis=1)
        if np.any(chords <= 0):
            raise GeometryError("repeated consecutive waypoints")
        knots = np.concatenate([[0.0], np.cumsum(chords)])
    else:
        raise ValueError(f"unknown knot spacing rule {knot_spacing!r}")

    curve = SplineCurve(knots, closed_pts, closed_refs)

    probe = np.sort(np.concatenate([knots[:-1], 0.5 * (knots[:-1] + knots[1:])]))
    xs = curve.center(probe, 1)
    speed = np.linalg.norm(xs, axis=1)
    if np.any(speed < 1e-12):
        raise GeometryError(f"stationary centerline at s={probe[np.argmin(speed)]:.6g}")
    r = curve.reference(probe)
    sin_angle = np.linalg.norm(np.cross(xs, r), axis=1) / (speed * np.linalg.norm(r, axis=1) + 1e-300)
    if np.any(sin_angle < 1e-6):
        bad = probe[np.argmin(sin_angle)]
        raise PathologicalFrameError(f"pathological frame: reference direction parallel to tangent at s={bad:.6g}")
    frame_at(curve, probe)  # raises on pathological frames
    return curve


# --------------------------------------------------------------------------
# frame


def darboux_terms(xs, xss, r, rs, check: bool = False):
    """Orthonormal frame, curvatures and speed factor from curve derivatives.

    Works on float arrays (batched along leading axes) and CasADi vectors.
    """
    speed = bk.norm(xs)
    e_s = bk.scale(xs, 1.0 / speed)
    r_perp = bk.sub(r, bk.scale(e_s, bk.dot(e_s, r)))
    e_y = bk.scale(r_perp, 1.0 / bk.norm(r_perp))
    e_n = bk.cross(e_s, e_y)

    a, b = bk.dot(xs, e_s), bk.dot(xs, e_y)
    c, d = bk.dot(r, e_s), bk.dot(r, e_y)
    if check:
        m = np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(m)
        bad = ~np.isfinite(cond) | (cond > PATHOLOGICAL_CONDITION)
        if np.any(bad):
            raise PathologicalFrameError(
                "pathological frame: reference direction parallel to tangent or vanishing"
            )
    rhs0 = bk.dot(e_n, xss) / speed
    rhs1 = bk.dot(e_n, rs) / speed
    det = a * d - b * c
    kappa_y = (d * rhs0 - b * rhs1) / det
    kappa_s = (a * rhs1 - c * rhs0) / det
    kappa_n = -bk.dot(bk.cross(xss, xs), e_n) / speed**3
    return e_s, e_y, e_n, kappa_s, kappa_y, kappa_n, speed


def frame_at(curve: ParametricCurve, s) -> FrameSample:
    """Evaluate the frame at scalar or array ``s`` (wrapped into one period)."""
    s_arr = np.asarray(s, dtype=float)
    xs = curve.center(s_arr, 1)
    xss = curve.center(s_arr, 2)
    r = curve.reference(s_arr, 0)
    rs = curve.reference(s_arr, 1)
    speed_check = np.linalg.norm(xs, axis=-1)
    if np.any(speed_check < 1e-300) or np.any(np.linalg.norm(r, axis=-1) < 1e-300):
        raise PathologicalFrameError("pathological frame: vanishing tangent or reference")
    with np.errstate(all="ignore"):
        e_s, e_y, e_n, ks, ky, kn, speed = darboux_terms(xs, xss, r, rs, check=True)
    return FrameSample(
        s=s_arr if s_arr.ndim else float(s_arr),
        origin=curve.center(s_arr, 0),
        e_s=e_s,
        e_y=e_y,
        e_n=e_n,
        kappa_s=ks,
        kappa_y=ky,
        kappa_n=kn,
        speed_factor=speed,
    )


def symbolic_frame(curve: ParametricCurve, s, anchor: float) -> FrameSample:
    """Frame as CasADi expressions of a symbolic parameter near ``anchor``."""
    x, xs, xss, r, rs = curve.symbolic(s, anchor)
    e_s, e_y, e_n, ks, ky, kn, speed = darboux_terms(xs, xss, r, rs)
    return FrameSample(s, x, e_s, e_y, e_n, ks, ky, kn, speed)


# --------------------------------------------------------------------------
# coordinate maps


def curvilinear_to_global(curve: ParametricCurve, state, frame: Optional[FrameSample] = None):
    """Map ``(s, y, n)`` (a :class:`CurvilinearState` or a tuple) to a global point."""
    if isinstance(state, CurvilinearState):
        s, y, n = state.s, state.y, state.n
    else:
        s, y, n = state
    f = frame if frame is not None else frame_at(curve, s)
    y = np.asarray(y, dtype=float)[..., None]
    n = np.asarray(n, dtype=float)[..., None]
    return f.origin + y * f.e_y + n * f.e_n


def _projection_residual(curve, x, s):
    f = frame_at(curve, s)
    d = x - f.origin
    r = float(np.dot(d, f.e_s))
    y, n = float(np.dot(d, f.e_y)), float(np.dot(d, f.e_n))
    margin = f.kappa_y * n + f.kappa_n * y
    dr = -f.speed_factor * (1.0 - margin)
    return r, dr, y, n, float(margin)


def global_to_curvilinear(
    curve: ParametricCurve,
    x,
    s_hint: float,
    config: GeometryConfig = GeometryConfig(),
) -> CurvilinearState:
    """Invert the curvilinear map near ``s_hint``.

    Newton iteration on the tangential residual ``(x - x^c(s)) . e_s(s)``;
    if it stalls, a scan over one period picks the root nearest the hint.
    """
    x = np.asarray(x, dtype=float)
    s = _newton_projection(curve, x, float(s_hint), config)
    if s is None:
        s = _scan_projection(curve, x, float(s_hint), config)
    r, _, y, n, margin = _projection_residual(curve, x, s)
    if margin >= 1.0 - SINGULAR_MARGIN_TOL:
        raise OutsideRegularNeighborhoodError(
            f"outside regular neighborhood: margin {margin:.6g} >= 1 at s={s:.6g}"
        )
    s_out = float(curve.wrap(s)) if curve.closed else s
    return CurvilinearState(s=s_out, y=y, n=n)


def _newton_projection(curve, x, s, config):
    step_cap = 0.25 * curve.period if curve.period else 1.0
    tight = 1e-3 * config.projection_tolerance
    for _ in range(config.projection_max_iter):
        r, dr, _, _, margin = _projection_residual(curve, x, s)
        if abs(r) <= tight:
            return s
        if margin >= 1.0 or abs(dr) < 1e-14:
            return None
        step = float(np.clip(-r / dr, -step_cap, step_cap))
        s += step
        if abs(step) <= 1e-15 * max(1.0, abs(s)):
            break
    r, *_ = _projection_residual(curve, x, s)
    return s if abs(r) <= config.projection_tolerance else None


def _scan_projection(curve, x, s_hint, config):
    span = curve.period if curve.period else 20.0
    grid = s_hint + np.linspace(-0.5 * span, 0.5 * span, 2001)
    f = frame_at(curve, grid)
    d = x - f.origin
    r = np.einsum("ij,ij->i", d, f.e_s)
    y = np.einsum("ij,ij->i", d, f.e_y)
    n = np.einsum("ij,ij->i", d, f.e_n)
    margin = f.kappa_y * n + f.kappa_n * y
    candidates = []
    for i in range(len(grid) - 1):
        if r[i] == 0.0 or r[i] * r[i + 1] < 0:
            if max(margin[i], margin[i + 1]) < 1.0:
                candidates.append(i)
    if not candidates:
        if np.any(margin >= 1.0):
            raise OutsideRegularNeighborhoodError("outside regular neighborhood: no regular projection exists")
        raise ProjectionError("projection did not converge")
    candidates.sort(key=lambda i: abs(grid[i] - s_hint))
    for i in candidates:
        s = _newton_projection(curve, x, 0.5 * (grid[i] + grid[i + 1]), config)
        if s is not None:
            return s
    raise ProjectionError(f"projection did not converge within {config.projection_max_iter} iterations")


# --------------------------------------------------------------------------
# kinematics


def regularity_margin(frame: FrameSample, y, n):
    """``k_y n + k_n y``; must stay below the regularity bound (< 1)."""
    return frame.kappa_y * n + frame.kappa_n * y


def curvilinear_rates(frame: FrameSample, y, n, v_components):
    """``(s_dot, y_dot, n_dot)`` from velocity components along ``(e_s, e_y, e_n)``."""
    v_s, v_y, v_n = v_components
    den = 1.0 - regularity_margin(frame, y, n)
    if not bk.is_symbolic(den, v_s, v_y, v_n) and np.any(np.asarray(den) <= 0.0):
        raise KinematicSingularityError("kinematic singularity: 1 - k_y n - k_n y <= 0")
    g = frame.speed_factor
    s_dot = v_s / (den * g)
    y_dot = v_y + n * frame.kappa_s * g * s_dot
    n_dot = v_n - y * frame.kappa_s * g * s_dot
    return s_dot, y_dot, n_dot


def frame_angular_velocity(frame: FrameSample, s_dot):
    """Angular velocity of the moving frame, in frame coordinates."""
    k = frame.speed_factor * s_dot
    return bk.vec(frame.kappa_s * k, -frame.kappa_y * k, frame.kappa_n * k)


def relative_angular_velocity(omega_b, R_cb, eta_p):
    """Angular velocity of the body relative to the moving frame, body axes."""
    if bk.is_symbolic(omega_b, R_cb, eta_p):
        return omega_b - ca.mtimes(ca.transpose(R_cb), eta_p)
    return np.asarray(omega_b, dtype=float) - np.asarray(R_cb, dtype=float).T @ np.asarray(eta_p, dtype=float)


# --------------------------------------------------------------------------
# export


FRAME_COLUMNS = (
    "s", "x", "y", "z",
    "es_x", "es_y", "es_z", "ey_x", "ey_y", "ey_z", "en_x", "en_y", "en_z",
    "kappa_s", "kappa_y", "kappa_n", "speed_factor",
)


def frame_table(curve: ParametricCurve, s_values) -> np.ndarray:
    f = frame_at(curve, np.asarray(s_values, dtype=float))
    return np.column_stack([
        np.atleast_1d(f.s), f.origin, f.e_s, f.e_y, f.e_n,
        f.kappa_s, f.kappa_y, f.kappa_n, f.speed_factor,
    ])


def export_frame_table(curve: ParametricCurve, s_values, out) -> None:
    """Write a comma-separated frame table with a header row to a path or stream."""
    table = frame_table(curve, s_values)
    buf = io.StringIO()
    np.savetxt(buf, table, delimiter=",", header=",".join(FRAME_COLUMNS), comments="", fmt="%.12g")
    if hasattr(out, "write"):
        out.write(buf.getvalue())
    else:
        with open(out, "w") as fh:
            fh.write(buf.getvalue())
