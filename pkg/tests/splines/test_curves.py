"""
Tests for the uniform cubic B-spline curves.

This module checks the matrix and cumulative forms against each other and
the analytic derivatives against central finite differences.
"""

import logging

import numpy as np
import pytest

from src.core.errors import DomainError
from src.splines import (
    KnotGrid,
    SplineR3,
    SplineSO3,
    eval_acceleration,
    eval_angular_velocity_body,
    eval_orientation,
    eval_position,
    eval_velocity,
    quat_angle,
    quat_conjugate,
    quat_exp,
    quat_log,
    quat_multiply,
)
from src.splines.basis import blending_weights, cumulative_weights


def test_covering_grid_counts_control_points():
    """Ten seconds at 0.02 s spacing need 503 control points."""
    grid = KnotGrid.covering(0.0, 10.0, 0.02)
    assert grid.n == 503
    assert grid.t_end == pytest.approx(10.0)


def test_locate_rejects_times_outside_domain():
    grid = KnotGrid(t0=1.0, dt=0.1, n=6)
    with pytest.raises(DomainError) as exc:
        grid.locate(np.array([1.05, 1.35]))
    assert exc.value.t == pytest.approx(1.35)
    assert exc.value.t_min == pytest.approx(1.0)
    assert exc.value.t_max == pytest.approx(1.3)

    with pytest.raises(DomainError):
        grid.locate(0.999)


def test_locate_last_segment():
    grid = KnotGrid(t0=0.0, dt=0.1, n=6)
    i, u = grid.locate(np.nextafter(grid.t_end, 0.0))
    assert i[0] == grid.n - 4
    assert 0.0 <= u[0] < 1.0


def test_weights_partition_of_unity():
    u = np.linspace(0.0, 0.999, 50)
    np.testing.assert_allclose(blending_weights(u, 0.1).sum(axis=1), 1.0, atol=1e-15)
    np.testing.assert_allclose(blending_weights(u, 0.1, 1).sum(axis=1), 0.0, atol=1e-12)
    np.testing.assert_allclose(blending_weights(u, 0.1, 2).sum(axis=1), 0.0, atol=1e-10)
    np.testing.assert_allclose(cumulative_weights(u, 0.1)[:, 0], 1.0)


def test_matrix_and_cumulative_forms_agree(rng):
    """Both forms of the position spline agree on 1000 random configurations."""
    for _ in range(1000):
        grid = KnotGrid(t0=rng.uniform(-5.0, 5.0), dt=rng.uniform(0.01, 1.0), n=4)
        spline = SplineR3(grid, rng.normal(scale=10.0, size=(4, 3)))
        t = grid.t0 + rng.uniform(0.0, 0.999) * grid.dt
        np.testing.assert_allclose(
            spline.position(t), spline.position_cumulative(t), rtol=0.0, atol=1e-12
        )


def test_constant_control_points():
    grid = KnotGrid(t0=0.0, dt=0.1, n=8)
    spline = SplineR3(grid, np.tile([1.0, -2.0, 3.0], (8, 1)))
    t = np.linspace(0.0, 0.49, 20)
    np.testing.assert_allclose(spline.position(t), np.tile([1.0, -2.0, 3.0], (20, 1)), atol=1e-14)
    np.testing.assert_allclose(spline.velocity(t), 0.0, atol=1e-12)


def test_linear_control_points_reproduce_a_line():
    """Control point k at time t0 + (k - 1) dt reproduces straight-line motion."""
    grid = KnotGrid(t0=0.0, dt=0.2, n=10)
    v = np.array([0.5, -1.0, 2.0])
    spline = SplineR3(grid, np.outer(grid.knot_time(np.arange(10)), v))
    t = np.linspace(0.0, 1.39, 30)
    np.testing.assert_allclose(spline.position(t), np.outer(t, v), atol=1e-12)
    np.testing.assert_allclose(spline.velocity(t), np.tile(v, (30, 1)), atol=1e-12)
    np.testing.assert_allclose(spline.acceleration(t), 0.0, atol=1e-9)


def test_r3_derivatives_match_finite_differences(make_r3_spline, rng):
    h = 1e-6
    for _ in range(100):
        spline = make_r3_spline(n=8, dt=0.1)
        t = rng.uniform(h, spline.grid.t_end - h)
        fd_vel = (spline.position(t + h) - spline.position(t - h)) / (2 * h)
        fd_acc = (spline.velocity(t + h) - spline.velocity(t - h)) / (2 * h)
        vel = eval_velocity(spline, t)
        acc = eval_acceleration(spline, t)
        assert np.linalg.norm(fd_vel - vel) <= 1e-6 * max(np.linalg.norm(vel), 1.0)
        assert np.linalg.norm(fd_acc - acc) <= 1e-6 * max(np.linalg.norm(acc), 1.0)


def test_basis_matrix_matches_evaluation(make_r3_spline, rng):
    spline = make_r3_spline(n=12, dt=0.05)
    t = np.sort(rng.uniform(0.0, spline.grid.t_end - 1e-9, size=40))
    for derivative, expected in enumerate(
        [spline.position(t), spline.velocity(t), spline.acceleration(t)]
    ):
        B = spline.basis_matrix(t, derivative)
        np.testing.assert_allclose(B @ spline.ctrl, expected, atol=1e-9)


def test_r3_rejects_wrong_shape():
    with pytest.raises(ValueError):
        SplineR3(KnotGrid(t0=0.0, dt=0.1, n=5), np.zeros((4, 3)))


def test_eval_position_matches_method(make_r3_spline):
    spline = make_r3_spline()
    np.testing.assert_array_equal(eval_position(spline, 0.33), spline.position(0.33))


def test_identity_rotation_spline():
    grid = KnotGrid(t0=0.0, dt=0.1, n=6)
    spline = SplineSO3(grid, np.tile([1.0, 0.0, 0.0, 0.0], (6, 1)))
    t = np.linspace(0.0, 0.29, 10)
    q, omega = spline.evaluate(t)
    np.testing.assert_allclose(q, np.tile([1.0, 0.0, 0.0, 0.0], (10, 1)), atol=1e-15)
    np.testing.assert_allclose(omega, 0.0, atol=1e-15)


def test_constant_rate_rotation_is_reproduced():
    """Control points on a one-parameter subgroup give a constant body rate."""
    dt = 0.05
    grid = KnotGrid(t0=0.0, dt=dt, n=20)
    w = np.array([0.3, -0.8, 1.1])
    ctrl = quat_exp(np.outer(np.arange(20) * dt, w))
    spline = SplineSO3(grid, ctrl)
    t = np.linspace(0.0, grid.t_end - 1e-6, 37)
    q, omega = spline.evaluate(t)
    np.testing.assert_allclose(omega, np.tile(w, (len(t), 1)), atol=1e-12)
    expected = quat_exp(np.outer(t + dt, w))
    assert np.max(quat_angle(q, expected)) < 1e-12


def test_so3_derivative_matches_finite_differences(make_so3_spline, rng):
    h = 1e-5
    for _ in range(100):
        spline = make_so3_spline(n=8, dt=0.1)
        t = rng.uniform(h, spline.grid.t_end - h)
        q_minus = eval_orientation(spline, t - h)
        q_plus = eval_orientation(spline, t + h)
        fd = quat_log(quat_multiply(quat_conjugate(q_minus), q_plus)) / (2 * h)
        assert np.max(np.abs(fd - eval_angular_velocity_body(spline, t))) < 1e-5


def test_orientations_are_unit(make_so3_spline, rng):
    spline = make_so3_spline(n=10, step=1.0)
    t = rng.uniform(0.0, spline.grid.t_end - 1e-9, size=100)
    np.testing.assert_allclose(np.linalg.norm(spline.orientation(t), axis=1), 1.0, atol=1e-12)


def test_sign_flip_of_control_point_is_invisible(make_so3_spline):
    spline = make_so3_spline(n=8)
    ctrl = spline.ctrl.copy()
    ctrl[3] *= -1.0
    flipped = SplineSO3(spline.grid, ctrl)
    t = np.linspace(0.0, spline.grid.t_end - 1e-9, 25)
    assert np.max(quat_angle(spline.orientation(t), flipped.orientation(t))) < 1e-12


def test_so3_rejects_non_unit_control_points(caplog):
    ctrl = np.tile([1.0, 0.0, 0.0, 0.0], (5, 1))
    ctrl[2] = [2.0, 0.0, 0.0, 0.0]
    with caplog.at_level(logging.ERROR, logger="src.splines.curves"):
        with pytest.raises(ValueError):
            SplineSO3(KnotGrid(t0=0.0, dt=0.1, n=5), ctrl)
    assert any("control point 2" in r.message for r in caplog.records)
