import logging
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from raceline.corridor import (
    BlockedCrossSectionError,
    Box,
    CorridorConfig,
    CorridorError,
    CorridorRing,
    Environment,
    Pillar,
    PointSet,
    Sphere,
    build_corridor,
    corridor_table,
    disjoint_neighbors,
    max_clearance_disc,
    ring_points,
    ring_polylines,
    signed_distance,
    validate_corridor,
)
from raceline.geometry import circle_curve, frame_at, line_curve

import runs

LINE = line_curve(origin=(0.0, 0.0, 3.0))


# -- signed distance -------------------------------------------------------


def test_empty_environment_returns_sentinel():
    env = Environment(max_distance=50.0)
    assert signed_distance(env, [1.0, 2.0, 3.0]) == 50.0


def test_sphere_distance():
    env = Environment([Sphere([0, 0, 0], 1.0)])
    assert signed_distance(env, [3.0, 0.0, 0.0]) == pytest.approx(2.0)
    assert signed_distance(env, [0.0, 0.5, 0.0]) == pytest.approx(-0.5)


def test_box_penetration_depth():
    env = Environment([Box([0, 0, 0], [2, 4, 6])])
    assert signed_distance(env, [0.5, 2.0, 3.0]) == pytest.approx(-0.5)
    assert signed_distance(env, [3.0, 5.0, 3.0]) == pytest.approx(np.sqrt(2.0))
    assert signed_distance(env, [1.0, 2.0, 7.0]) == pytest.approx(1.0)


def test_pillar_distance():
    env = Environment([Pillar([0, 0, 0], 0.5, 4.0)])
    assert signed_distance(env, [2.0, 0.0, 1.0]) == pytest.approx(1.5)
    assert signed_distance(env, [0.0, 0.0, 6.0]) == pytest.approx(2.0)
    assert signed_distance(env, [0.0, 0.25, 2.0]) == pytest.approx(-0.25)
    assert signed_distance(env, [3.5, 0.0, 8.0]) == pytest.approx(5.0)


def test_point_set_distance_minus_inflation():
    pts = np.array([[0.0, 0, 0], [10.0, 0, 0]])
    env = Environment([PointSet(pts, inflation=0.25)])
    assert signed_distance(env, [4.0, 3.0, 0.0]) == pytest.approx(4.75)


def test_bounds_act_as_walls():
    env = Environment(bounds=([0, 0, 0], [10, 10, 5]))
    assert signed_distance(env, [5.0, 5.0, 1.0]) == pytest.approx(1.0)
    assert signed_distance(env, [5.0, 5.0, 6.0]) == pytest.approx(-1.0)


def test_primitive_validation():
    with pytest.raises(ValueError):
        Sphere([0, 0, 0], 0.0)
    with pytest.raises(ValueError):
        Pillar([0, 0, 0], -1.0, 2.0)
    with pytest.raises(ValueError):
        PointSet(np.array([[np.inf, 0, 0]]), 0.1)


def test_vectorized_queries():
    env = Environment([Sphere([0, 0, 0], 1.0), Pillar([5, 0, 0], 0.5, 3.0)])
    pts = np.random.default_rng(0).uniform(-6, 6, (50, 3))
    batch = env.signed_distance(pts)
    single = np.array([signed_distance(env, p) for p in pts])
    np.testing.assert_allclose(batch, single)


# -- max clearance disc ----------------------------------------------------


def brute_force_best(env, curve, s, cfg):
    """Grid argmax with the documented tie-breaking, by explicit loops."""
    f = frame_at(curve, s)
    m = int(np.floor(cfg.lateral_bound / cfg.grid_step + 1e-9))
    best = None
    for i in range(-m, m + 1):
        for j in range(-m, m + 1):
            y, n = i * cfg.grid_step, j * cfg.grid_step
            if f.kappa_y * n + f.kappa_n * y > cfg.lam:
                continue
            c = float(env.signed_distance(f.origin + y * f.e_y + n * f.e_n))
            key = (-c, np.hypot(y, n), y, n)
            if best is None or key < best[0]:
                best = (key, (y, n), c)
    return best[1], best[2]


def test_empty_environment_centered_full_ring():
    ring = max_clearance_disc(Environment(), LINE, 1.0, CorridorConfig())
    assert ring.center_yn == (0.0, 0.0)
    assert ring.radius == CorridorConfig().cap


def test_pillar_pushes_center_away_and_matches_brute_force():
    env = Environment([Pillar([1.0, 1.0, 0.0], 0.2, 6.0)])
    cfg = CorridorConfig(grid_step=0.1)
    ring = max_clearance_disc(env, LINE, 1.0, cfg)
    center, clearance = brute_force_best(env, LINE, 1.0, cfg)
    assert ring.center_yn == pytest.approx(center, abs=1e-12)
    assert ring.clearance == clearance
    assert ring.center_yn[0] == pytest.approx(-2.0)


def test_brute_force_agreement_on_pillar_field():
    sc = runs.template("pillar_field")
    env, curve = sc.environment(), sc.curve()
    cfg = CorridorConfig(grid_step=0.1)
    for s in (0.0, 1.55, 2.0, 4.3, 6.9):
        ring = max_clearance_disc(env, curve, s, cfg)
        center, clearance = brute_force_best(env, curve, s, cfg)
        assert ring.center_yn == pytest.approx(center, abs=1e-12)
        assert ring.clearance == pytest.approx(clearance, abs=1e-12)


def test_blocked_cross_section():
    env = Environment([Box([-10, -10, -10], [10, 10, 10])])
    with pytest.raises(BlockedCrossSectionError, match="blocked cross-section") as err:
        max_clearance_disc(env, LINE, 2.5, CorridorConfig())
    assert err.value.s == 2.5


def test_regularity_clips_grid_and_radius():
    curve = circle_curve(2.0)
    cfg = CorridorConfig(lateral_bound=2.0, lam=0.9)
    ring = max_clearance_disc(Environment(), curve, 0.3, cfg)
    f = frame_at(curve, 0.3)
    y, n = ring.center_yn
    k = np.hypot(f.kappa_y, f.kappa_n)
    assert f.kappa_y * n + f.kappa_n * y + ring.radius * k <= 0.9 + 1e-12


def test_config_validation():
    with pytest.raises(CorridorError):
        CorridorConfig(grid_step=0.0)
    with pytest.raises(CorridorError):
        CorridorConfig(avoidance_radius=-0.1)


# -- corridors -------------------------------------------------------------


def test_empty_environment_corridor():
    rings = build_corridor(Environment(), LINE, np.linspace(0, 10, 100))
    assert len(rings) == 100
    assert all(r.radius == CorridorConfig().cap for r in rings)


def test_pillar_on_centerline_excludes_centerline():
    env = Environment([Pillar([5.0, 0.0, 0.0], 0.3, 6.0)])
    s_grid = np.linspace(4.0, 6.0, 21)
    rings = build_corridor(env, LINE, s_grid, CorridorConfig(avoidance_radius=0.3))
    assert len(rings) == len(s_grid)
    at = rings[10]
    assert at.s == pytest.approx(5.0)
    assert np.hypot(*at.center_yn) > at.radius  # the centerline is outside the disc
    report = validate_corridor(env, LINE, rings, avoidance_radius=0.3)
    assert report.ok


def test_disjoint_neighbors_warned(caplog):
    # one sphere left of the line at s=0, one right of it at s=2: the best
    # centers jump sides and the two unit discs cannot touch
    env = Environment([Sphere([0.0, 0.9, 3.0], 0.3), Sphere([2.0, -0.9, 3.0], 0.3)])
    cfg = CorridorConfig(lateral_bound=1.0, grid_step=0.1, avoidance_radius=0.3)
    with caplog.at_level(logging.WARNING, logger="raceline.corridor"):
        rings = build_corridor(env, LINE, [0.0, 2.0], cfg)
    assert rings[0].center_yn[0] < 0 < rings[1].center_yn[0]
    assert disjoint_neighbors(LINE, rings) == [0]
    assert any("disjoint" in r.getMessage() for r in caplog.records)
    report = validate_corridor(env, LINE, rings, avoidance_radius=0.3)
    assert report.disjoint == [0.0]


def test_validation_empty_environment():
    env = Environment(max_distance=25.0)
    rings = build_corridor(env, LINE, np.linspace(0, 5, 11))
    report = validate_corridor(env, LINE, rings, avoidance_radius=0.3)
    assert report.ok
    assert report.min_clearance == 25.0
    assert report.min_margin == pytest.approx(25.0 - 0.3)


def test_oversized_ring_reported_at_its_s():
    env = Environment([Pillar([3.0, 1.0, 0.0], 0.2, 6.0)])
    rings = build_corridor(env, LINE, np.linspace(0.0, 6.0, 13))
    bad = rings[6]
    assert bad.s == pytest.approx(3.0)
    rings[6] = CorridorRing(bad.s, (0.0, 0.0), 1.5, bad.clearance)
    report = validate_corridor(env, LINE, rings, avoidance_radius=0.3)
    assert [s for s, _ in report.violations] == [pytest.approx(3.0)]
    assert "violation s=3" in report.to_text()


def test_validation_is_sound_on_pillar_field():
    sc = runs.template("pillar_field")
    env, curve = sc.environment(), sc.curve()
    cfg = sc.corridor_config(0.3)
    rings = build_corridor(env, curve, np.linspace(0, 8, 80, endpoint=False), cfg)
    report = validate_corridor(env, curve, rings, (128, 16), avoidance_radius=0.3, tolerance=cfg.grid_step)
    assert report.ok
    assert report.min_clearance >= 0.3 - cfg.grid_step


@settings(max_examples=15, deadline=None)
@given(s=st.floats(0.0, 8.0, exclude_max=True), a=st.sampled_from([0.1, 0.2, 0.3]), b=st.sampled_from([0.35, 0.4, 0.5]))
def test_larger_avoidance_never_grows_a_ring(s, a, b):
    sc = runs.template("pillar_field")
    env, curve = sc.environment(), sc.curve()
    small = max_clearance_disc(env, curve, s, sc.corridor_config(a))
    large = max_clearance_disc(env, curve, s, sc.corridor_config(b))
    assert large.radius <= small.radius + 1e-12


def test_exports():
    env = Environment([Sphere([2.0, 1.0, 3.0], 0.4)])
    rings = build_corridor(env, LINE, [0.0, 1.0, 2.0])
    table = corridor_table(rings).splitlines()
    assert table[0] == "s,y_c,n_c,radius,clearance"
    assert len(table) == 4
    poly = ring_polylines(LINE, rings, angles=8).splitlines()
    assert poly[0] == "ring,x,y,z"
    assert len(poly) == 1 + 3 * 9
    pts = ring_points(LINE, rings[0], angles=8)
    assert pts.shape == (9, 3)


def test_dense_corridor_timing_informational():
    """800 rings on the pillar field; the wall time is printed, not asserted."""
    sc = runs.template("pillar_field")
    start = time.perf_counter()
    rings = build_corridor(sc.environment(), sc.curve(), np.linspace(0, 8, 800, endpoint=False), sc.corridor_config())
    print(f"800 rings in {time.perf_counter() - start:.2f} s")
    assert len(rings) == 800
