"""Curvilinear safe flight corridors: one collision-free disc per cross-section.

At each fixed ``s`` the cross-section plane spanned by ``(e_y, e_n)`` is
searched on a grid for the point furthest from every obstacle.  The disc
around it, shrunk by the avoidance radius, is collision-free because signed
distance is 1-Lipschitz.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .geometry import ParametricCurve, frame_at

log = logging.getLogger(__name__)


class CorridorError(ValueError):
    pass


class BlockedCrossSectionError(CorridorError):
    def __init__(self, s: float, best: float, avoidance: float):
        super().__init__(
            f"blocked cross-section at s={s:.6g}: best clearance {best:.4g} m does not exceed "
            f"avoidance radius {avoidance:.4g} m"
        )
        self.s = s


# --------------------------------------------------------------------------
# obstacles


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise CorridorError("sphere radius must be positive")

    def distance(self, p: np.ndarray) -> np.ndarray:
        return np.linalg.norm(p - np.asarray(self.center, dtype=float), axis=-1) - self.radius


@dataclass(frozen=True)
class Box:
    """Axis-aligned box between corners ``lo`` and ``hi``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if np.any(np.asarray(self.hi, dtype=float) <= np.asarray(self.lo, dtype=float)):
            raise CorridorError("box upper corner must exceed lower corner on every axis")

    def distance(self, p: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)
        q = np.abs(p - 0.5 * (lo + hi)) - 0.5 * (hi - lo)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside


@dataclass(frozen=True)
class Pillar:
    """Vertical capped cylinder standing on ``base`` (its bottom center)."""

    base: tuple
    radius: float
    height: float

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise CorridorError("pillar radius and height must be positive")

    def distance(self, p: np.ndarray) -> np.ndarray:
        b = np.asarray(self.base, dtype=float)
        d_r = np.linalg.norm(p[..., 0:2] - b[0:2], axis=-1) - self.radius
        d_z = np.abs(p[..., 2] - (b[2] + 0.5 * self.height)) - 0.5 * self.height
        outside = np.hypot(np.maximum(d_r, 0.0), np.maximum(d_z, 0.0))
        return outside + np.minimum(np.maximum(d_r, d_z), 0.0)


@dataclass(frozen=True)
class PointSet:
    """Finite point cloud, each point inflated to a ball of ``inflation`` radius."""

    points: tuple
    inflation: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise CorridorError("point set must be a non-empty (M, 3) array")
        if not np.all(np.isfinite(pts)):
            raise CorridorError("point set must be finite")
        if self.inflation < 0:
            raise CorridorError("inflation radius must be non-negative")
        object.__setattr__(self, "_tree", cKDTree(pts))

    def distance(self, p: np.ndarray) -> np.ndarray:
        d, _ = self._tree.query(p)
        return d - self.inflation


@dataclass
class Environment:
    """Static obstacles.  ``max_distance`` caps every query, including empty scenes."""

    obstacles: list = field(default_factory=list)
    bounds: Optional[tuple] = None
    max_distance: float = 100.0

    def signed_distance(self, p) -> np.ndarray:
        """Signed distance to the nearest obstacle; negative inside one."""
        p = np.asarray(p, dtype=float)
        out = np.full(p.shape[:-1], self.max_distance, dtype=float)
        for ob in self.obstacles:
            out = np.minimum(out, ob.distance(p))
        if self.bounds is not None:
            # distance to the walls, positive inside the workspace
            out = np.minimum(out, -Box(*self.bounds).distance(p))
        return out if out.ndim else float(out)


def signed_distance(env: Environment, p) -> float:
    return env.signed_distance(p)


# --------------------------------------------------------------------------
# rings


@dataclass(frozen=True)
class CorridorConfig:
    """Search grid and limits for corridor construction.

    ``lateral_bound`` limits ``|y|`` and ``|n|``; ``radius_cap`` limits ring
    radii (defaults to the lateral bound).
    """

    avoidance_radius: float = 0.3
    grid_step: float = 0.05
    lateral_bound: float = 2.0
    radius_cap: Optional[float] = None
    lam: float = 0.9

    def __post_init__(self):
        if self.grid_step <= 0 or self.lateral_bound <= 0:
            raise CorridorError("grid step and lateral bound must be positive")
        if self.avoidance_radius < 0:
            raise CorridorError("avoidance radius must be non-negative")

    @property
    def cap(self) -> float:
        return self.lateral_bound if self.radius_cap is None else self.radius_cap


@dataclass(frozen=True)
class CorridorRing:
    s: float
    center_yn: tuple
    radius: float
    clearance: float


def _lateral_grid(config: CorridorConfig) -> tuple:
    m = int(np.floor(config.lateral_bound / config.grid_step + 1e-9))
    axis = config.grid_step * np.arange(-m, m + 1)
    y, n = np.meshgrid(axis, axis, indexing="ij")
    return y.reshape(-1), n.reshape(-1)


def max_clearance_disc(env: Environment, curve: ParametricCurve, s: float, config: CorridorConfig = CorridorConfig()) -> CorridorRing:
    """Best disc in the cross-section at ``s``, searched on the lateral grid."""
    f = frame_at(curve, float(s))
    y, n = _lateral_grid(config)
    margin = f.kappa_y * n + f.kappa_n * y
    keep = margin <= config.lam
    if not np.any(keep):
        raise CorridorError(f"no lateral grid point satisfies the regularity bound at s={s:.6g}")
    y, n, margin = y[keep], n[keep], margin[keep]
    pts = f.origin + y[:, None] * f.e_y + n[:, None] * f.e_n
    clearance = np.asarray(env.signed_distance(pts))
    # order: clearance descending, then distance from centerline, then y, then n
    order = np.lexsort((n, y, np.hypot(y, n), -clearance))
    i = order[0]
    best = float(clearance[i])
    if best <= config.avoidance_radius:
        raise BlockedCrossSectionError(float(s), best, config.avoidance_radius)
    radius = min(config.cap, best - config.avoidance_radius)
    k_norm = float(np.hypot(f.kappa_n, f.kappa_y))
    if k_norm > 0:
        radius = min(radius, max(0.0, (config.lam - float(margin[i])) / k_norm))
    return CorridorRing(float(s), (float(y[i]), float(n[i])), float(radius), best)


def ring_points(curve: ParametricCurve, ring: CorridorRing, angles: int = 32, radii: int = 1) -> np.ndarray:
    """3D points on the ring boundary (``radii=1``) or spread over the disc."""
    f = frame_at(curve, ring.s)
    th = np.linspace(0.0, 2 * np.pi, angles, endpoint=False)
    rr = ring.radius * np.linspace(1.0, 0.0, radii, endpoint=False)[::-1] if radii > 1 else np.array([ring.radius])
    yc, nc = ring.center_yn
    y = (yc + rr[:, None] * np.cos(th)[None, :]).reshape(-1)
    n = (nc + rr[:, None] * np.sin(th)[None, :]).reshape(-1)
    y, n = np.concatenate([[yc], y]), np.concatenate([[nc], n])
    return f.origin + y[:, None] * f.e_y + n[:, None] * f.e_n


def ring_center_3d(curve: ParametricCurve, ring: CorridorRing) -> np.ndarray:
    f = frame_at(curve, ring.s)
    return f.origin + ring.center_yn[0] * f.e_y + ring.center_yn[1] * f.e_n


def disjoint_neighbors(curve: ParametricCurve, rings: list) -> list:
    """Indices ``i`` where ring ``i`` and ring ``i+1`` cannot overlap (centers further apart than the radii sum)."""
    out = []
    for i in range(len(rings) - 1):
        a, b = rings[i], rings[i + 1]
        gap = np.linalg.norm(ring_center_3d(curve, a) - ring_center_3d(curve, b))
        if gap > a.radius + b.radius:
            out.append(i)
    return out


def build_corridor(env: Environment, curve: ParametricCurve, s_grid, config: CorridorConfig = CorridorConfig()) -> list:
    """One ring per grid parameter, in grid order.  Blocked sections abort."""
    rings = [max_clearance_disc(env, curve, float(s), config) for s in np.asarray(s_grid, dtype=float)]
    for i in disjoint_neighbors(curve, rings):
        log.warning("corridor rings at s=%.6g and s=%.6g are disjoint", rings[i].s, rings[i + 1].s)
    return rings


@dataclass
class CorridorReport:
    min_clearance: float
    min_margin: float
    violations: list
    disjoint: list
    rings: int

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_text(self) -> str:
        lines = [
            f"rings: {self.rings}",
            f"min_clearance: {self.min_clearance:.6g}",
            f"min_margin: {self.min_margin:.6g}",
            f"violations: {len(self.violations)}",
            f"disjoint_neighbors: {len(self.disjoint)}",
        ]
        lines += [f"violation s={s:.6g} margin={m:.6g}" for s, m in self.violations]
        return "\n".join(lines) + "\n"


def validate_corridor(
    env: Environment,
    curve: ParametricCurve,
    rings: list,
    sample_density: tuple = (64, 8),
    avoidance_radius: float = 0.3,
    tolerance: float = 0.05,
) -> CorridorReport:
    """Sample every disc densely and check clearance against the avoidance radius.

    ``sample_density`` is ``(angles, radial rings)``.  A ring violates when
    some sample's clearance falls below ``avoidance_radius - tolerance``.
    """
    angles, radii = sample_density
    min_clear, violations = np.inf, []
    for ring in rings:
        sd = np.asarray(env.signed_distance(ring_points(curve, ring, angles, radii)))
        worst = float(sd.min())
        min_clear = min(min_clear, worst)
        if worst < avoidance_radius - tolerance:
            violations.append((ring.s, worst - avoidance_radius))
    return CorridorReport(
        min_clearance=float(min_clear),
        min_margin=float(min_clear - avoidance_radius),
        violations=violations,
        disjoint=[rings[i].s for i in disjoint_neighbors(curve, rings)],
        rings=len(rings),
    )


CORRIDOR_COLUMNS = ("s", "y_c", "n_c", "radius", "clearance")


def corridor_table(rings: list) -> str:
    out = io.StringIO()
    out.write(",".join(CORRIDOR_COLUMNS) + "\n")
    for r in rings:
        out.write(f"{r.s:.12g},{r.center_yn[0]:.12g},{r.center_yn[1]:.12g},{r.radius:.12g},{r.clearance:.12g}\n")
    return out.getvalue()


def ring_polylines(curve: ParametricCurve, rings: list, angles: int = 32) -> str:
    """Closed 3D polylines, one block per ring separated by blank lines."""
    out = io.StringIO()
    out.write("ring,x,y,z\n")
    for i, ring in enumerate(rings):
        pts = ring_points(curve, ring, angles, 1)[1:]
        for p in np.vstack([pts, pts[:1]]):
            out.write(f"{i},{p[0]:.9g},{p[1]:.9g},{p[2]:.9g}\n")
    return out.getvalue()
