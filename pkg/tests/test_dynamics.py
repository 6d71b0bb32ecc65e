import math

import numpy as np
import pytest

from raceline import dynamics as dyn
from raceline.dynamics import VehicleParams, Wrench

P = VehicleParams()


def random_quat(rng):
    q = rng.standard_normal(4)
    return q / np.linalg.norm(q)


def test_default_vehicle_parameters():
    assert P.max_total_thrust == pytest.approx(32.373)
    assert P.max_rotor_thrust == pytest.approx(8.09325)
    assert P.hover_rotor_thrust == pytest.approx(2.4525)


@pytest.mark.parametrize("field,value", [("m", 0.0), ("twr", -1.0), ("t_min", -0.1), ("t_min", 9.0)])
def test_params_validation(field, value):
    with pytest.raises(ValueError):
        VehicleParams(**{field: value})


def test_quaternion_rate_examples():
    np.testing.assert_array_equal(dyn.quaternion_rate([1, 0, 0, 0], [0, 0, 0]), [0, 0, 0, 0])
    np.testing.assert_allclose(dyn.quaternion_rate([1, 0, 0, 0], [0, 0, math.pi]), [0, 0, 0, math.pi / 2])
    rng = np.random.default_rng(0)
    for _ in range(20):
        q = random_quat(rng)
        assert abs(q @ dyn.quaternion_rate(q, rng.standard_normal(3))) < 1e-12


def test_rotation_matrix_orthonormal_and_consistent():
    rng = np.random.default_rng(1)
    q = random_quat(rng)
    R = dyn.rotation_matrix(q)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-14)
    assert np.linalg.det(R) == pytest.approx(1.0)
    v = rng.standard_normal(3)
    np.testing.assert_allclose(dyn.body_to_global(q, v), R @ v, atol=1e-14)
    np.testing.assert_allclose(dyn.global_to_body(q, R @ v), v, atol=1e-14)


def test_hover_wrench_vanishes():
    w = dyn.quadrotor_wrench([1, 0, 0, 0], np.full(4, P.m * P.g / 4), P)
    np.testing.assert_allclose(w.F_b, 0.0, atol=1e-14)
    np.testing.assert_allclose(w.K_b, 0.0, atol=1e-14)


def test_wrench_moments():
    w = dyn.quadrotor_wrench([1, 0, 0, 0], [1.0, 2.0, 3.0, 4.0], P)
    np.testing.assert_allclose(w.K_b, [-0.60, 0.00, -0.10], atol=1e-14)


def test_wrench_gravity_at_ninety_degree_pitch():
    q = np.array([math.cos(math.pi / 4), 0.0, math.sin(math.pi / 4), 0.0])  # body x points down
    w = dyn.quadrotor_wrench(q, np.zeros(4), P)
    R = dyn.rotation_matrix(q)
    down_axis = int(np.argmin(R[2]))  # body axis most aligned with global -z
    expected = np.zeros(3)
    expected[down_axis] = P.m * P.g  # gravity pulls along the downward-pointing axis
    np.testing.assert_allclose(R @ np.asarray(w.F_b), [0, 0, -P.m * P.g], atol=1e-12)
    np.testing.assert_allclose(np.abs(w.F_b), np.abs(expected), atol=1e-12)


def test_rigid_body_derivative_examples():
    zero = Wrench(np.zeros(3), np.zeros(3))
    vd, wd = dyn.rigid_body_derivative(np.array([1.0, 2, 3]), np.zeros(3), zero, P)
    np.testing.assert_array_equal(vd, 0.0)
    np.testing.assert_array_equal(wd, 0.0)
    vd, _ = dyn.rigid_body_derivative(np.array([1.0, 0, 0]), np.array([0, 0, 1.0]), zero, P)
    np.testing.assert_allclose(vd, [0, -1, 0])
    _, wd = dyn.rigid_body_derivative(np.zeros(3), np.array([1.0, 2, 3]), zero, P)
    np.testing.assert_allclose(wd, [-4.2, 2.1, 0.0], atol=1e-12)


def test_point_mass_examples():
    _, vd = dyn.point_mass_derivative(np.zeros(3), np.zeros(3), [0, 0, P.m * P.g], P)
    np.testing.assert_allclose(vd, 0.0, atol=1e-15)
    xd, vd = dyn.point_mass_derivative(np.zeros(3), np.array([1.0, 2, 3]), np.zeros(3), P)
    np.testing.assert_allclose(vd, [0, 0, -9.81])
    np.testing.assert_allclose(xd, [1, 2, 3])
    assert dyn.PointMassInput(np.array([32.0, 0, 0])).within_bounds(P)
    assert not dyn.PointMassInput(np.array([32.4, 0, 0])).within_bounds(P)


def test_quadrotor_input_bounds():
    assert dyn.QuadrotorInput(np.full(4, 0.2)).within_bounds(P)
    assert not dyn.QuadrotorInput(np.array([0.1, 1, 1, 1])).within_bounds(P)
    assert not dyn.QuadrotorInput(np.array([8.1, 1, 1, 1])).within_bounds(P)


def test_body_and_global_newton_agree():
    rng = np.random.default_rng(2)
    for _ in range(10):
        q = random_quat(rng)
        v_b, w_b, T = rng.standard_normal(3), rng.standard_normal(3), rng.uniform(0.2, 8, 4)
        z = np.concatenate([rng.standard_normal(3), q, v_b, w_b])
        zd = dyn.quadrotor_derivative(z, T, P)
        R = dyn.rotation_matrix(q)
        # d/dt (R v_b) = R (v_b_dot + w x v_b) must equal total force / m in global axes
        Rdot = R @ np.array([[0, -w_b[2], w_b[1]], [w_b[2], 0, -w_b[0]], [-w_b[1], w_b[0], 0]])
        a_global = Rdot @ v_b + R @ zd[7:10]
        expected = R @ np.array([0, 0, T.sum()]) / P.m - np.array([0, 0, P.g])
        np.testing.assert_allclose(a_global, expected, atol=1e-12)
        np.testing.assert_allclose(zd[0:3], R @ v_b, atol=1e-14)


def _integrate(f, z, h, steps):
    for _ in range(steps):
        z = dyn.rk4_step(f, z, h)
    return z


def test_point_mass_energy_conserved_in_free_flight():
    z0 = np.array([0.0, 0.0, 5.0, 2.0, -1.0, 3.0])
    z1 = _integrate(lambda z: dyn.point_mass_state_derivative(z, np.zeros(3), P), z0, 1e-3, 1000)
    e0 = dyn.mechanical_energy(z0[:3], z0[3:], P)
    e1 = dyn.mechanical_energy(z1[:3], z1[3:], P)
    assert abs(e1 - e0) / abs(e0) <= 1e-6


def test_quadrotor_energy_conserved_in_free_flight():
    q0 = dyn.quat_from_two_vectors([0, 0, 1], [0.3, -0.2, 1.0])
    z0 = np.concatenate([[0.0, 0.0, 5.0], q0, [1.0, 0.5, -0.3], np.zeros(3)])
    f = lambda z: dyn.quadrotor_derivative(z, np.zeros(4), P)  # noqa: E731
    z1 = _integrate(f, z0, 1e-3, 1000)

    def energy(z):
        v = dyn.body_to_global(z[3:7] / np.linalg.norm(z[3:7]), z[7:10])
        return dyn.mechanical_energy(z[:3], v, P, z[10:13])

    assert abs(energy(z1) - energy(z0)) / abs(energy(z0)) <= 1e-6


def test_global_angular_momentum_conserved_without_moments():
    """Torque-free rotation: rotor thrusts are all zero, so K_b vanishes."""
    q0 = np.array([1.0, 0, 0, 0])
    w0 = np.array([3.0, -2.0, 1.0])
    z0 = np.concatenate([np.zeros(3), q0, np.zeros(3), w0])
    f = lambda z: dyn.quadrotor_derivative(z, np.zeros(4), P)  # noqa: E731
    I = np.asarray(P.inertia)

    def momentum(z):
        q = z[3:7] / np.linalg.norm(z[3:7])
        return dyn.rotation_matrix(q) @ (I * z[10:13])

    z1 = _integrate(f, z0, 1e-4, 10000)
    L0, L1 = momentum(z0), momentum(z1)
    assert np.linalg.norm(L1 - L0) / np.linalg.norm(L0) <= 1e-8


def test_quat_from_two_vectors_minimal_rotation():
    np.testing.assert_allclose(dyn.quat_from_two_vectors([0, 0, 1], [0, 0, 9.81]), [1, 0, 0, 0])
    q = dyn.quat_from_two_vectors([0, 0, 1], [1, 0, 1])
    np.testing.assert_allclose(q, [math.cos(math.pi / 8), 0, math.sin(math.pi / 8), 0], atol=1e-15)
    q = dyn.quat_from_two_vectors([0, 0, 1], [0, 0, -1])
    np.testing.assert_allclose(dyn.rotation_matrix(q) @ [0, 0, 1], [0, 0, -1], atol=1e-15)


def test_symbolic_and_numeric_paths_agree():
    import casadi as ca

    rng = np.random.default_rng(3)
    z = np.concatenate([rng.standard_normal(3), random_quat(rng), rng.standard_normal(6)])
    T = rng.uniform(0.2, 8, 4)
    zs, Ts = ca.SX.sym("z", 13), ca.SX.sym("T", 4)
    fn = ca.Function("f", [zs, Ts], [dyn.quadrotor_derivative(zs, Ts, P)])
    np.testing.assert_allclose(np.asarray(fn(z, T)).reshape(-1), dyn.quadrotor_derivative(z, T, P), atol=1e-13)
