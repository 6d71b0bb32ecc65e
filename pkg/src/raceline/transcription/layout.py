"""Shared configuration and variable layout for both formulations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..geometry import ParametricCurve, frame_at
from .gates import Gate
from .schemes import CollocationScheme

EUCLIDEAN = "euclidean"
CURVILINEAR = "curvilinear"


class TranscriptionError(ValueError):
    pass


@dataclass
class Track:
    """Centerline plus ordered gates.  Gates carry their centerline parameter ``s``."""

    curve: ParametricCurve
    gates: list = field(default_factory=list)

    @property
    def s_start(self) -> float:
        knots = getattr(self.curve, "knots", None)
        return float(knots[0]) if knots is not None else 0.0

    @property
    def period(self) -> float:
        if self.curve.period is None:
            raise TranscriptionError("periodic racelines need a curve with a finite period")
        return float(self.curve.period)


@dataclass
class TranscriptionConfig:
    """Discretization and modeling options shared by both formulations.

    ``elements_per_phase`` is the element count between consecutive gates
    (Euclidean), and the default density for the curvilinear grid, which
    has ``elements`` elements in total when given.
    """

    scheme: CollocationScheme = field(default_factory=CollocationScheme)
    elements_per_phase: int = 6
    elements: Optional[int] = None
    lam: float = 0.9
    speed_guess: float = 5.0
    passage_direction: bool = False
    gate_interpolation: bool = False
    min_duration: float = 1e-4
    max_duration: float = 100.0
    min_sigma: float = 1e-4

    def __post_init__(self):
        if self.elements_per_phase < 1:
            raise TranscriptionError("elements per phase must be at least 1")
        if self.elements is not None and self.elements < 1:
            raise TranscriptionError("element count must be at least 1")
        if not 0.0 < self.lam < 1.0:
            raise TranscriptionError("regularity bound must lie in (0, 1)")
        if self.speed_guess <= 0:
            raise TranscriptionError("speed guess must be positive")

    def curvilinear_elements(self, n_gates: int) -> int:
        if self.elements is not None:
            return self.elements
        return self.elements_per_phase * max(n_gates, 1)


@dataclass
class GridGuess:
    """Values for the named variable blocks of a transcription.

    Shapes: ``X`` (N+1, nw) boundary states, ``XS`` (N, d, nw) stage
    states, ``US`` (N, d, nu) stage inputs or ``U`` (N, nu) element
    inputs, ``H`` durations, ``SIG`` (N, d) time-per-parameter at stages.
    """

    blocks: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.blocks[name]

    def __contains__(self, name):
        return name in self.blocks

    def get(self, name, default=None):
        return self.blocks.get(name, default)


def apply_guess(builder, guess: Optional[GridGuess]) -> None:
    if guess is None:
        return
    for name, values in guess.blocks.items():
        if name not in builder._index:
            continue
        expected = len(builder._index[name])
        values = np.asarray(values, dtype=float)
        if values.size != expected:
            raise TranscriptionError(
                f"warmstart block {name!r} has {values.size} values, transcription expects {expected}"
            )
        builder.set_initial(name, values.reshape(-1))


def arc_length(curve: ParametricCurve, s_a: float, s_b: float, samples: int = 64) -> float:
    s = np.linspace(s_a, s_b, samples + 1)
    speed = np.linalg.norm(curve.center(s, 1), axis=-1)
    return float(np.sum(0.5 * (speed[1:] + speed[:-1]) * np.diff(s)))


def centerline_velocity(curve: ParametricCurve, s, speed: float) -> np.ndarray:
    return speed * frame_at(curve, s).e_s
