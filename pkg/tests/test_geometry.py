import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from raceline.geometry import (
    CurvilinearState,
    GeometryConfig,
    InsufficientWaypointsError,
    KinematicSingularityError,
    OutsideRegularNeighborhoodError,
    PathologicalFrameError,
    circle_curve,
    curvilinear_rates,
    curvilinear_to_global,
    export_frame_table,
    fit_periodic_curve,
    frame_angular_velocity,
    frame_at,
    global_to_curvilinear,
    helix_curve,
    line_curve,
    regularity_margin,
    relative_angular_velocity,
    FRAME_COLUMNS,
)
from oracles import fd_curvatures, random_spline, relative_error


def circle2():
    return circle_curve(2.0)


# -- curve fitting ---------------------------------------------------------


def test_unit_square_interpolated_exactly():
    pts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    curve = fit_periodic_curve(pts, np.tile([0, 0, 1.0], (4, 1)))
    assert curve.period == 4
    for k, p in enumerate(pts):
        np.testing.assert_allclose(curve.center(float(k)), p, atol=1e-12)


def test_circle_spline_stays_near_radius():
    t = 2 * np.pi * np.arange(16) / 16
    pts = np.column_stack([5 * np.cos(t), 5 * np.sin(t), np.zeros(16)])
    refs = np.column_stack([np.cos(t), np.sin(t), np.zeros(16)])
    curve = fit_periodic_curve(pts, refs)
    s = np.linspace(0, 16, 4001)
    r = np.linalg.norm(curve.center(s)[:, :2], axis=1)
    assert np.max(np.abs(r - 5.0)) < 0.05


def test_two_waypoints_rejected():
    with pytest.raises(InsufficientWaypointsError, match="insufficient waypoints"):
        fit_periodic_curve([[0, 0, 0], [1, 0, 0]], [[0, 0, 1], [0, 0, 1]])


def test_zero_reference_rejected():
    pts = [[0, 0, 0], [1, 0, 0], [1, 1, 0]]
    with pytest.raises(ValueError, match="zero reference"):
        fit_periodic_curve(pts, [[0, 0, 1], [0, 0, 0], [0, 0, 1]])


def test_reference_parallel_to_tangent_rejected():
    t = 2 * np.pi * np.arange(6) / 6
    pts = np.column_stack([np.cos(t), np.sin(t), np.zeros(6)])
    tangents = np.column_stack([-np.sin(t), np.cos(t), np.zeros(6)])
    with pytest.raises(PathologicalFrameError):
        fit_periodic_curve(pts, tangents)


def test_spline_periodic_closure():
    curve = random_spline(np.random.default_rng(3))
    for der in range(3):
        np.testing.assert_allclose(curve.center(0.0, der), curve.center(curve.period - 1e-15, der), atol=1e-9)
    np.testing.assert_allclose(curve.reference(0.0, 1), curve.reference(curve.period - 1e-15, 1), atol=1e-9)


# -- frames and curvatures -------------------------------------------------


def test_straight_line_frame():
    f = frame_at(line_curve(), 1.3)
    np.testing.assert_allclose(f.e_s, [1, 0, 0])
    np.testing.assert_allclose(f.e_y, [0, 1, 0])
    np.testing.assert_allclose(f.e_n, [0, 0, 1])
    assert f.kappa_s == f.kappa_y == f.kappa_n == 0.0
    assert f.speed_factor == 1.0


def test_circle_frame():
    f = frame_at(circle2(), 0.7)
    assert f.kappa_n == pytest.approx(-0.5, abs=1e-12)
    assert abs(f.kappa_s) < 1e-12 and abs(f.kappa_y) < 1e-12
    assert f.speed_factor == pytest.approx(2.0)


def test_helix_curvatures_match_finite_differences():
    curve = helix_curve()
    for s in (0.1, 1.0, 2.5, 4.0):
        k = frame_at(curve, s)
        analytic = np.array([k.kappa_s, k.kappa_y, k.kappa_n])
        assert abs(k.kappa_s) > 1e-3
        assert relative_error(analytic, fd_curvatures(curve, s)) < 1e-6


def test_random_spline_curvatures_match_finite_differences():
    rng = np.random.default_rng(11)
    for _ in range(3):
        curve = random_spline(rng)
        for s in rng.uniform(0, curve.period, 10):
            if abs(s - round(s)) < 1e-3:
                continue
            f = frame_at(curve, s)
            analytic = np.array([f.kappa_s, f.kappa_y, f.kappa_n])
            assert relative_error(analytic, fd_curvatures(curve, s)) < 1e-6


def test_frame_orthonormal_on_random_curves():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(5):
        curve = random_spline(rng)
        f = frame_at(curve, rng.uniform(0, curve.period, 2000))
        R = np.stack([f.e_s, f.e_y, f.e_n], axis=-1)
        gram = np.einsum("nji,njk->nik", R, R)
        worst = max(worst, float(np.max(np.abs(gram - np.eye(3)))))
        np.testing.assert_array_equal(f.e_n, np.cross(f.e_s, f.e_y))
    assert worst <= 1e-10


def test_frame_vectorized_matches_scalar():
    curve = random_spline(np.random.default_rng(2))
    s = np.array([0.3, 2.2, 5.9])
    fv = frame_at(curve, s)
    for i, si in enumerate(s):
        fs = frame_at(curve, si)
        np.testing.assert_allclose(fv.e_y[i], fs.e_y, atol=1e-14)
        assert fv.kappa_n[i] == pytest.approx(fs.kappa_n, abs=1e-14)


def test_frame_wraps_parameter():
    curve = random_spline(np.random.default_rng(4))
    a, b = frame_at(curve, 1.25), frame_at(curve, 1.25 + curve.period)
    np.testing.assert_allclose(a.origin, b.origin, atol=1e-12)


# -- coordinate maps -------------------------------------------------------


def test_centerline_point_maps_to_origin():
    curve = circle2()
    np.testing.assert_allclose(curvilinear_to_global(curve, (0.4, 0.0, 0.0)), frame_at(curve, 0.4).origin)


def test_straight_line_map():
    np.testing.assert_allclose(curvilinear_to_global(line_curve(), CurvilinearState(3.0, 1.0, 2.0)), [3, 1, 2])


def test_circle_lateral_offset():
    np.testing.assert_allclose(curvilinear_to_global(circle2(), (0.0, 0.5, 0.0)), [2.5, 0, 0], atol=1e-15)


def test_projection_of_centerline_point():
    curve = random_spline(np.random.default_rng(7))
    st_ = global_to_curvilinear(curve, curve.center(2.3), s_hint=2.0)
    assert st_.s == pytest.approx(2.3, abs=1e-9)
    assert abs(st_.y) < 1e-9 and abs(st_.n) < 1e-9


def test_projection_of_circle_center_outside_neighborhood():
    with pytest.raises(OutsideRegularNeighborhoodError, match="outside regular neighborhood"):
        global_to_curvilinear(circle2(), [0.0, 0.0, 0.0], s_hint=0.3)


@settings(max_examples=60, deadline=None)
@given(
    s=st.floats(0.0, 2 * math.pi, exclude_max=True),
    y=st.floats(-0.5 * 2.0, 2.0),
    n=st.floats(-3.0, 3.0),
)
def test_round_trip_property_on_circle(s, y, n):
    curve = circle2()
    x = curvilinear_to_global(curve, (s, y, n))
    back = global_to_curvilinear(curve, x, s_hint=s + 0.2)
    np.testing.assert_allclose(curvilinear_to_global(curve, back), x, atol=1e-9)


def test_round_trip_respects_configured_tolerance():
    cfg = GeometryConfig(projection_tolerance=1e-6, projection_max_iter=5)
    curve = helix_curve()
    x = curvilinear_to_global(curve, (1.0, 0.2, -0.1))
    back = global_to_curvilinear(curve, x, 1.1, cfg)
    assert np.linalg.norm(curvilinear_to_global(curve, back) - x) <= 1e-6


def test_geometry_config_validates_lambda():
    with pytest.raises(ValueError):
        GeometryConfig(lam=1.0)


# -- kinematics ------------------------------------------------------------


def test_rates_on_straight_line():
    f = frame_at(line_curve(), 0.0)
    assert curvilinear_rates(f, 0.0, 0.0, (2.0, 3.0, 4.0)) == (2.0, 3.0, 4.0)


def test_rates_on_circle():
    f = frame_at(circle2(), 0.0)
    s_dot, _, _ = curvilinear_rates(f, 1.0, 0.0, (3.0, 0.0, 0.0))
    assert s_dot == pytest.approx(1.0)


def test_rates_singularity():
    f = frame_at(circle2(), 0.0)
    with pytest.raises(KinematicSingularityError, match="kinematic singularity"):
        curvilinear_rates(f, -2.0, 0.0, (1.0, 0.0, 0.0))


def test_regularity_margin_examples():
    assert regularity_margin(frame_at(line_curve(), 0.0), 1.3, -0.7) == 0.0
    f = frame_at(circle2(), 0.0)
    assert regularity_margin(f, 1.0, 0.0) == pytest.approx(-0.5)
    m = regularity_margin(f, -1.9, 0.0)
    assert m == pytest.approx(0.95) and m > 0.9


def test_rates_reproduce_euclidean_path():
    """Integrating the curvilinear rates along a known path reproduces it."""
    curve = helix_curve()

    def path(t):
        return np.array([1.3 * np.cos(t), 1.3 * np.sin(t), 0.5 * t + 0.2 * np.sin(3 * t)])

    def vel(t):
        return np.array([-1.3 * np.sin(t), 1.3 * np.cos(t), 0.5 + 0.6 * np.cos(3 * t)])

    def rhs(t, z):
        f = frame_at(curve, z[0])
        v = vel(t)
        return np.array(curvilinear_rates(f, z[1], z[2], (v @ f.e_s, v @ f.e_y, v @ f.e_n)))

    z0 = global_to_curvilinear(curve, path(0.0), 0.0)
    z = np.array([z0.s, z0.y, z0.n])
    h, T = 1e-3, 2.0
    for i in range(int(T / h)):
        t = i * h
        k1 = rhs(t, z)
        k2 = rhs(t + h / 2, z + h / 2 * k1)
        k3 = rhs(t + h / 2, z + h / 2 * k2)
        k4 = rhs(t + h, z + h * k3)
        z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    travelled = 2.0 * 1.4
    err = np.linalg.norm(curvilinear_to_global(curve, tuple(z)) - path(T))
    assert err <= 1e-6 * travelled


def test_frame_angular_velocity_examples():
    np.testing.assert_array_equal(frame_angular_velocity(frame_at(line_curve(), 0.0), 2.0), [0, 0, 0])
    f = frame_at(circle2(), 0.0)
    eta = frame_angular_velocity(f, 1.0)
    np.testing.assert_allclose(eta, [0, 0, -1], atol=1e-12)
    # in global axes this is a +1 rad/s turn about z
    np.testing.assert_allclose(f.rotation() @ eta, [0, 0, 1], atol=1e-12)


def test_frame_angular_velocity_matches_basis_motion_on_helix():
    curve = helix_curve()
    s, s_dot, h = 1.1, 0.7, 1e-6
    f = frame_at(curve, s)
    omega_global = f.rotation() @ frame_angular_velocity(f, s_dot)
    fp, fm = frame_at(curve, s + h * s_dot), frame_at(curve, s - h * s_dot)
    for e, ep, em in ((f.e_s, fp.e_s, fm.e_s), (f.e_y, fp.e_y, fm.e_y), (f.e_n, fp.e_n, fm.e_n)):
        fd = (ep - em) / (2 * h)
        assert relative_error(np.cross(omega_global, e), fd) < 1e-6


def test_relative_angular_velocity_examples():
    w = np.array([0.3, -1.0, 2.0])
    np.testing.assert_array_equal(relative_angular_velocity(w, np.eye(3), np.zeros(3)), w)
    R = frame_at(helix_curve(), 0.4).rotation()
    eta = np.array([0.2, 0.5, -0.1])
    np.testing.assert_allclose(relative_angular_velocity(R.T @ eta, R, eta), 0.0, atol=1e-15)
    np.testing.assert_allclose(relative_angular_velocity([1, 0, 0], np.eye(3), [0, 0, -1]), [1, 0, 1])


# -- export ----------------------------------------------------------------


def test_frame_table_export(tmp_path):
    path = tmp_path / "frame.csv"
    export_frame_table(circle_curve(5.0), np.linspace(0, 6, 7), path)
    rows = path.read_text().splitlines()
    assert rows[0].split(",") == list(FRAME_COLUMNS)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (7, len(FRAME_COLUMNS))
    np.testing.assert_allclose(data[:, FRAME_COLUMNS.index("kappa_n")], -0.2)
