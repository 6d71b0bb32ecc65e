"""Scenario files: a versioned YAML schema, validation and bundled templates.

Units: lengths in meters, masses in kg, inertia in kg m^2, thrust in N,
times in seconds, angles never appear (orientations are vectors).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .corridor import Box, CorridorConfig, Environment, Pillar, PointSet, Sphere
from .dynamics import VehicleParams
from .geometry import (
    GeometryError,
    ParametricCurve,
    StraightCurve,
    fit_periodic_curve,
    frame_at,
    global_to_curvilinear,
)
from .solver import SolverConfig
from .transcription.gates import Gate, GateError
from .transcription.layout import CURVILINEAR, EUCLIDEAN, Track, TranscriptionConfig
from .transcription.models import VehicleModel, canonical_kind
from .transcription.schemes import CollocationScheme, SchemeError

SCHEMA_VERSION = 1
TEMPLATES = ("straight", "circle", "figure_eight", "pillar_field")

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "name": "unnamed",
    "gates": [],
    "environment": {"obstacles": [], "bounds": None, "max_distance": 100.0},
    "vehicle": {
        "mass": 1.0,
        "gravity": 9.81,
        "inertia": [1.0e-3, 1.0e-3, 1.7e-3],
        "arm_length": 0.15,
        "drag_torque": 0.05,
        "twr": 3.3,
        "t_min": 0.2,
        "radius": 0.3,
        "max_speed": None,
    },
    "transcription": {
        "formulation": CURVILINEAR,
        "scheme": "collocation",
        "degree": 7,
        "substeps": 1,
        "elements_per_phase": 6,
        "elements": None,
        "lam": 0.9,
        "speed_guess": 5.0,
        "passage_direction": False,
        "gate_interpolation": False,
    },
    "solver": {"tolerance": 1.0e-6, "max_iterations": 3000},
    "corridor": {
        "enabled": False,
        "avoidance_radius": 0.3,
        "grid_step": 0.05,
        "lateral_bound": 2.0,
        "radius_cap": None,
    },
    "reference_lap_times": {},
}

_SECTIONS = ("environment", "vehicle", "transcription", "solver", "corridor")


class ScenarioError(ValueError):
    """Invalid scenario; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _merge(defaults: dict, given: dict, path: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if key not in defaults:
            raise ScenarioError(f"{path}.{key}" if path else key, "unknown field")
        if isinstance(defaults[key], dict) and key != "reference_lap_times":
            if not isinstance(value, dict):
                raise ScenarioError(f"{path}.{key}" if path else key, "expected a mapping")
            out[key] = _merge(defaults[key], value, f"{path}.{key}" if path else key)
        else:
            out[key] = value
    return out


def _vec3(value, path: str) -> np.ndarray:
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(path, "expected three numbers") from None
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ScenarioError(path, "expected three finite numbers")
    return v


def _positive(value, path: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(path, "expected a number") from None
    if not v > 0:
        raise ScenarioError(path, f"must be positive, got {value}")
    return v


@dataclass
class Scenario:
    """A validated scenario.  ``data`` is the complete, defaults-filled document."""

    data: dict
    base_dir: Path = field(default_factory=Path.cwd, compare=False)

    def __post_init__(self):
        self._curve = None
        self._validate()

    # -- construction ----------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Optional[Path] = None) -> "Scenario":
        if not isinstance(raw, dict):
            raise ScenarioError("", "scenario document must be a mapping")
        version = raw.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ScenarioError("schema_version", f"unsupported version {version}, expected {SCHEMA_VERSION}")
        if "centerline" not in raw:
            raise ScenarioError("centerline", "required field missing")
        defaults = dict(DEFAULTS, centerline=None)
        data = _merge(defaults, raw, "")
        data["centerline"] = copy.deepcopy(raw["centerline"])
        return cls(data, Path(base_dir) if base_dir else Path.cwd())

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    # -- accessors -------------------------------------------------------

    @property
    def name(self) -> str:
        return str(self.data["name"])

    def section(self, key: str) -> dict:
        return self.data[key]

    @property
    def vehicle_radius(self) -> float:
        return float(self.data["vehicle"]["radius"])

    @property
    def avoidance_radius(self) -> float:
        return float(self.data["corridor"]["avoidance_radius"])

    @property
    def corridor_enabled(self) -> bool:
        return bool(self.data["corridor"]["enabled"])

    @property
    def reference_lap_times(self) -> dict:
        return dict(self.data["reference_lap_times"])

    def vehicle_params(self) -> VehicleParams:
        v = self.data["vehicle"]
        return VehicleParams(
            m=float(v["mass"]), g=float(v["gravity"]), inertia=tuple(float(i) for i in v["inertia"]),
            arm_length=float(v["arm_length"]), drag_torque=float(v["drag_torque"]),
            twr=float(v["twr"]), t_min=float(v["t_min"]),
        )

    def vehicle_model(self, kind: str = "quadrotor") -> VehicleModel:
        v = self.data["vehicle"]
        max_speed = v["max_speed"]
        return VehicleModel(canonical_kind(kind), self.vehicle_params(), float(v["radius"]),
                            None if max_speed is None else float(max_speed))

    def curve(self) -> ParametricCurve:
        if self._curve is None:
            self._curve = _build_curve(self.data["centerline"])
        return self._curve

    def gates(self) -> list:
        return _build_gates(self.data["gates"], self.curve())

    def track(self) -> Track:
        return Track(self.curve(), self.gates())

    def environment(self) -> Environment:
        return _build_environment(self.data["environment"], self.base_dir)

    @property
    def formulation(self) -> str:
        return self.data["transcription"]["formulation"]

    def scheme(self, kind: Optional[str] = None, degree: Optional[int] = None) -> CollocationScheme:
        t = self.data["transcription"]
        kind = kind or t["scheme"]
        return CollocationScheme(
            "gauss_legendre" if kind in ("collocation", "gauss_legendre") else "rk4",
            int(degree or t["degree"]),
            int(t["substeps"]),
        )

    def transcription_config(self, scheme: Optional[CollocationScheme] = None, **overrides) -> TranscriptionConfig:
        t = self.data["transcription"]
        kw = dict(
            scheme=scheme or self.scheme(),
            elements_per_phase=int(t["elements_per_phase"]),
            elements=None if t["elements"] is None else int(t["elements"]),
            lam=float(t["lam"]),
            speed_guess=float(t["speed_guess"]),
            passage_direction=bool(t["passage_direction"]),
            gate_interpolation=bool(t["gate_interpolation"]),
        )
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return TranscriptionConfig(**kw)

    def solver_config(self) -> SolverConfig:
        s = self.data["solver"]
        return SolverConfig(tolerance=float(s["tolerance"]), max_iterations=int(s["max_iterations"]))

    def corridor_config(self, avoidance_radius: Optional[float] = None) -> CorridorConfig:
        c = self.data["corridor"]
        return CorridorConfig(
            avoidance_radius=float(c["avoidance_radius"] if avoidance_radius is None else avoidance_radius),
            grid_step=float(c["grid_step"]),
            lateral_bound=float(c["lateral_bound"]),
            radius_cap=None if c["radius_cap"] is None else float(c["radius_cap"]),
            lam=float(self.data["transcription"]["lam"]),
        )

    # -- validation ------------------------------------------------------

    def _validate(self) -> None:
        d = self.data
        v = d["vehicle"]
        _positive(v["radius"], "vehicle.radius")
        try:
            self.vehicle_params()
        except (ValueError, TypeError) as exc:
            raise ScenarioError("vehicle", str(exc)) from None
        if v["max_speed"] is not None:
            _positive(v["max_speed"], "vehicle.max_speed")
        t = d["transcription"]
        if t["formulation"] not in (EUCLIDEAN, CURVILINEAR):
            raise ScenarioError("transcription.formulation", f"unknown formulation {t['formulation']!r}")
        if t["scheme"] not in ("collocation", "gauss_legendre", "rk4"):
            raise ScenarioError("transcription.scheme", f"unknown scheme {t['scheme']!r}")
        try:
            self.transcription_config()
        except (SchemeError, ValueError) as exc:
            raise ScenarioError("transcription", str(exc)) from None
        try:
            self.solver_config()
        except ValueError as exc:
            raise ScenarioError("solver", str(exc)) from None
        try:
            self.corridor_config()
        except ValueError as exc:
            raise ScenarioError("corridor", str(exc)) from None
        for label, value in d["reference_lap_times"].items():
            _positive(value, f"reference_lap_times.{label}")
        try:
            self.curve()
        except GeometryError as exc:
            raise ScenarioError("centerline", str(exc)) from None
        gates = self.gates()
        for g in gates:
            try:
                g.effective_size(self.vehicle_radius)
            except GateError as exc:
                raise ScenarioError(f"gates[{g.index}]", str(exc)) from None
        _check_gate_order(gates, self.curve())
        self.environment()


# --------------------------------------------------------------------------
# builders


def _build_curve(node) -> ParametricCurve:
    if not isinstance(node, dict):
        raise ScenarioError("centerline", "expected a mapping")
    kind = node.get("type", "spline")
    if kind == "straight":
        known = {"type", "origin", "direction", "reference", "period"}
        _no_extra(node, known, "centerline")
        direction = _vec3(node.get("direction", [1, 0, 0]), "centerline.direction")
        if np.linalg.norm(direction) < 1e-12:
            raise ScenarioError("centerline.direction", "must be nonzero")
        reference = _vec3(node.get("reference", [0, 1, 0]), "centerline.reference")
        if np.linalg.norm(np.cross(direction, reference)) < 1e-9:
            raise ScenarioError("centerline.reference", "must not be parallel to the direction")
        return StraightCurve(
            _vec3(node.get("origin", [0, 0, 0]), "centerline.origin"),
            direction / np.linalg.norm(direction),
            reference,
            _positive(node.get("period", 10.0), "centerline.period"),
        )
    if kind != "spline":
        raise ScenarioError("centerline.type", f"unknown centerline type {kind!r}")
    _no_extra(node, {"type", "waypoints", "references", "knot_spacing"}, "centerline")
    if "waypoints" not in node:
        raise ScenarioError("centerline.waypoints", "required field missing")
    pts = np.array([_vec3(p, f"centerline.waypoints[{i}]") for i, p in enumerate(node["waypoints"])])
    if len(pts) < 3:
        raise ScenarioError("centerline.waypoints", f"insufficient waypoints: need at least 3, got {len(pts)}")
    refs = node.get("references")
    if refs is None:
        refs = default_references(pts)
    else:
        refs = np.array([_vec3(r, f"centerline.references[{i}]") for i, r in enumerate(refs)])
    return fit_periodic_curve(pts, refs, node.get("knot_spacing", "index"))


def default_references(points: np.ndarray) -> np.ndarray:
    """Horizontal directions ``z x tangent`` from central-difference chords."""
    tangent = np.roll(points, -1, axis=0) - np.roll(points, 1, axis=0)
    refs = np.cross([0.0, 0.0, 1.0], tangent)
    norms = np.linalg.norm(refs, axis=1)
    if np.any(norms < 1e-9):
        k = int(np.argmin(norms))
        raise ScenarioError(f"centerline.references[{k}]", "vertical tangent; give reference directions explicitly")
    return refs / norms[:, None]


def _no_extra(node: dict, known: set, path: str) -> None:
    for key in node:
        if key not in known:
            raise ScenarioError(f"{path}.{key}", "unknown field")


def _build_gates(specs, curve: ParametricCurve) -> list:
    if not isinstance(specs, list):
        raise ScenarioError("gates", "expected a list")
    knots = getattr(curve, "knots", None)
    gates = []
    known = {"waypoint", "center", "normal", "s", "shape", "radius", "half_width", "half_height", "up", "name"}
    for i, g in enumerate(specs):
        path = f"gates[{i}]"
        if not isinstance(g, dict):
            raise ScenarioError(path, "expected a mapping")
        _no_extra(g, known, path)
        s = g.get("s")
        if "waypoint" in g:
            if knots is None:
                raise ScenarioError(f"{path}.waypoint", "waypoint gates need a spline centerline")
            k = int(g["waypoint"])
            if not 0 <= k < len(knots) - 1:
                raise ScenarioError(f"{path}.waypoint", f"no waypoint {k}")
            s = float(knots[k])
            f = frame_at(curve, s)
            center = f.origin if "center" not in g else _vec3(g["center"], f"{path}.center")
            normal = f.e_s if "normal" not in g else _vec3(g["normal"], f"{path}.normal")
        else:
            if "center" not in g:
                raise ScenarioError(path, "gate needs a waypoint index or a center")
            center = _vec3(g["center"], f"{path}.center")
            if s is None:
                try:
                    s = _nearest_parameter(curve, center)
                except GeometryError as exc:
                    raise ScenarioError(path, f"cannot locate gate on the centerline: {exc}") from None
            normal = _vec3(g["normal"], f"{path}.normal") if "normal" in g else frame_at(curve, float(s)).e_s
        shape = g.get("shape", "circle")
        dims = {}
        if shape == "circle":
            dims["radius"] = _positive(g.get("radius", 0.6), f"{path}.radius")
        elif shape == "rectangle":
            dims["half_width"] = _positive(g.get("half_width", 1.25), f"{path}.half_width")
            dims["half_height"] = _positive(g.get("half_height", 1.25), f"{path}.half_height")
        else:
            raise ScenarioError(f"{path}.shape", f"unknown shape {shape!r}")
        up = None if g.get("up") is None else _vec3(g["up"], f"{path}.up")
        try:
            gates.append(Gate(center, normal, shape, up=up, s=float(s), index=i, name=str(g.get("name", "")), **dims))
        except GateError as exc:
            raise ScenarioError(path, str(exc)) from None
    return gates


def _nearest_parameter(curve: ParametricCurve, point: np.ndarray) -> float:
    span = curve.period if curve.period else 10.0
    grid = np.linspace(0.0, span, 512, endpoint=False)
    hint = grid[np.argmin(np.linalg.norm(curve.center(grid) - point, axis=1))]
    return float(global_to_curvilinear(curve, point, hint).s)


def _check_gate_order(gates: list, curve: ParametricCurve) -> None:
    """Gates must appear in increasing ``s`` with at most one wrap."""
    if len(gates) < 2 or curve.period is None:
        return
    s = np.array([g.s for g in gates])
    drops = int(np.sum(np.diff(s) <= 0)) + int(s[0] <= s[-1])
    if drops > 1:
        raise ScenarioError("gates", "gate order is inconsistent with the centerline direction")


def _build_environment(node: dict, base_dir: Path) -> Environment:
    obstacles = []
    for i, ob in enumerate(node["obstacles"]):
        path = f"environment.obstacles[{i}]"
        if not isinstance(ob, dict) or "type" not in ob:
            raise ScenarioError(path, "obstacle needs a type")
        kind = ob["type"]
        try:
            if kind == "sphere":
                obstacles.append(Sphere(tuple(_vec3(ob["center"], f"{path}.center")), float(ob["radius"])))
            elif kind == "box":
                obstacles.append(Box(tuple(_vec3(ob["lo"], f"{path}.lo")), tuple(_vec3(ob["hi"], f"{path}.hi"))))
            elif kind == "pillar":
                obstacles.append(Pillar(tuple(_vec3(ob["base"], f"{path}.base")), float(ob["radius"]), float(ob["height"])))
            elif kind == "points":
                if "file" in ob:
                    f = (base_dir / ob["file"]).resolve()
                    if not f.exists():
                        raise ScenarioError(f"{path}.file", f"file not found: {f}")
                    pts = np.loadtxt(f, delimiter=",", ndmin=2)
                else:
                    pts = np.asarray(ob["points"], dtype=float)
                obstacles.append(PointSet(tuple(map(tuple, pts)), float(ob.get("inflation", 0.0))))
            else:
                raise ScenarioError(f"{path}.type", f"unknown obstacle type {kind!r}")
        except KeyError as exc:
            raise ScenarioError(f"{path}.{exc.args[0]}", "required field missing") from None
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(path, str(exc)) from None
    bounds = node["bounds"]
    if bounds is not None:
        lo, hi = _vec3(bounds[0], "environment.bounds[0]"), _vec3(bounds[1], "environment.bounds[1]")
        if np.any(hi <= lo):
            raise ScenarioError("environment.bounds", "upper corner must exceed lower corner")
        bounds = (tuple(lo), tuple(hi))
    return Environment(obstacles, bounds, _positive(node["max_distance"], "environment.max_distance"))


# --------------------------------------------------------------------------
# loading


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file or a bundled template name."""
    p = Path(path)
    if not p.exists() and str(path) in TEMPLATES:
        return load_template(str(path))
    if not p.exists():
        raise ScenarioError("", f"scenario file not found: {p}")
    text = p.read_text()
    return _parse(text, str(p), p.parent)


def load_template(name: str) -> Scenario:
    if name not in TEMPLATES:
        raise ScenarioError("", f"unknown template {name!r}; available: {', '.join(TEMPLATES)}")
    text = resources.files("raceline.templates").joinpath(f"{name}.yaml").read_text()
    return _parse(text, f"template {name}", Path.cwd())


def _parse(text: str, source: str, base_dir: Path) -> Scenario:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioError("", f"parse error in {source}{where}: {getattr(exc, 'problem', exc)}") from None
    return Scenario.from_dict(raw, base_dir)
