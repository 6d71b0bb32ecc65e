"""Minimum-time periodic racelines for point-mass and quadrotor vehicles.

Racelines are computed through ordered gates in global coordinates or in
curvilinear coordinates along a centerline, where safe flight corridors
handle static obstacles.
"""

from .dynamics import VehicleParams
from .geometry import GeometryConfig, fit_periodic_curve, frame_at
from .pipeline import replay_validate, run_raceline, solve_drone, solve_point_mass, warmstart_drone
from .scenario import Scenario, load_scenario, load_template

__version__ = "0.1.0"
