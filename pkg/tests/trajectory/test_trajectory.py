"""
Tests for the continuous-time trajectory.

Predictions are checked against independent oracles: scipy rotations,
homogeneous 4x4 transforms and finite differences of the splines.
"""

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.spatial.transform import Rotation

from src.core.errors import DomainError, InsufficientDataError
from src.splines import KnotGrid, SplineR3, SplineSO3, quat_angle
from src.trajectory import (
    Extrinsics,
    Trajectory,
    TrajectoryRecord,
    dof_from_gravity,
    fit_to_poses,
    gravity_dof_jacobian,
    gravity_from_dof,
    lidar_point_to_map,
    predict_accel,
    predict_gyro,
)


def homogeneous(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = Rotation.from_quat(np.roll(q, -1)).as_matrix()
    T[:3, 3] = p
    return T


def stationary_trajectory(n: int = 8, dt: float = 0.1) -> Trajectory:
    grid = KnotGrid(t0=0.0, dt=dt, n=n)
    return Trajectory(
        rot=SplineSO3(grid, np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))),
        pos=SplineR3(grid, np.zeros((n, 3))),
        gravity=np.array([0.0, 0.0, -9.81]),
    )


def test_stationary_predictions():
    traj = stationary_trajectory()
    t = np.linspace(0.0, 0.49, 7)
    np.testing.assert_allclose(predict_gyro(traj, t), 0.0, atol=1e-15)
    np.testing.assert_allclose(predict_accel(traj, t), np.tile([0.0, 0.0, 9.81], (7, 1)), atol=1e-12)


def test_accel_prediction_matches_oracle(make_trajectory, rng):
    traj = make_trajectory()
    t = rng.uniform(0.0, traj.grid.t_end - 1e-9, size=20)
    q, _ = traj.pose(t)
    R = Rotation.from_quat(np.roll(q, -1, axis=1)).as_matrix()
    expected = np.einsum("nji,nj->ni", R, traj.pos.acceleration(t) - traj.gravity)
    np.testing.assert_allclose(predict_accel(traj, t), expected, atol=1e-9)


def test_trajectory_rejects_bad_gravity(make_r3_spline, make_so3_spline):
    with pytest.raises(ValueError):
        Trajectory(rot=make_so3_spline(), pos=make_r3_spline(), gravity=np.array([0.0, 0.0, -9.0]))
    traj = Trajectory(rot=make_so3_spline(), pos=make_r3_spline(), gravity=np.zeros(3))
    assert np.all(traj.gravity == 0.0)


def test_trajectory_rejects_mismatched_grids(make_r3_spline, make_so3_spline):
    with pytest.raises(ValueError):
        Trajectory(rot=make_so3_spline(n=10), pos=make_r3_spline(n=11), gravity=np.zeros(3))


def test_rebased_trajectory_keeps_measurements(make_trajectory, rng):
    traj = make_trajectory()
    rebased = traj.rebased()
    np.testing.assert_allclose(rebased.rot.ctrl[0], [1.0, 0.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(rebased.pos.ctrl[0], 0.0, atol=1e-12)
    assert np.linalg.norm(rebased.gravity) == pytest.approx(9.81)
    t = rng.uniform(0.0, traj.grid.t_end - 1e-9, size=15)
    np.testing.assert_allclose(rebased.predict_accel(t), traj.predict_accel(t), atol=1e-9)
    np.testing.assert_allclose(rebased.predict_gyro(t), traj.predict_gyro(t), atol=1e-12)


def test_point_to_map_matches_homogeneous_chain(make_trajectory, truth_extrinsics, rng):
    traj = make_trajectory()
    points = rng.normal(scale=5.0, size=(10, 3))
    times = rng.uniform(0.0, traj.grid.t_end - 1e-9, size=10)
    t0 = 0.05
    T_LI = homogeneous(truth_extrinsics.rotation, truth_extrinsics.translation)
    q0, p0 = traj.pose(t0)
    T_0 = homogeneous(q0, p0)
    mapped = lidar_point_to_map(traj, truth_extrinsics, points, times, t0)
    for k in range(10):
        qj, pj = traj.pose(times[k])
        chain = np.linalg.inv(T_LI) @ np.linalg.inv(T_0) @ homogeneous(qj, pj) @ T_LI
        expected = chain[:3, :3] @ points[k] + chain[:3, 3]
        np.testing.assert_allclose(mapped[k], expected, atol=1e-10)


def test_point_to_map_is_identity_at_reference_time(make_trajectory, truth_extrinsics, rng):
    traj = make_trajectory()
    points = rng.normal(size=(5, 3))
    mapped = lidar_point_to_map(traj, truth_extrinsics, points, np.full(5, 0.3), 0.3)
    np.testing.assert_allclose(mapped, points, atol=1e-12)


def test_gravity_parametrization(rng):
    for _ in range(10):
        g = rng.normal(size=3)
        g = 9.81 * g / np.linalg.norm(g)
        np.testing.assert_allclose(gravity_from_dof(dof_from_gravity(g)), g, atol=1e-12)
    np.testing.assert_allclose(gravity_from_dof(np.zeros(2)), [0.0, 0.0, -9.81])

    dof = np.array([0.3, -0.2])
    h = 1e-7
    fd = np.column_stack([
        (gravity_from_dof(dof + h * e) - gravity_from_dof(dof - h * e)) / (2 * h) for e in np.eye(2)
    ])
    np.testing.assert_allclose(gravity_dof_jacobian(dof), fd, atol=1e-6)


def test_extrinsics_from_euler_matches_scipy():
    ext = Extrinsics.from_euler(np.array([10.0, 20.0, -30.0]), np.array([0.1, 0.2, 0.3]))
    expected = Rotation.from_euler("xyz", [10.0, 20.0, -30.0], degrees=True).as_matrix()
    np.testing.assert_allclose(ext.matrix, expected, atol=1e-12)
    np.testing.assert_allclose(ext.euler_deg(), [10.0, 20.0, -30.0], atol=1e-9)
    assert ext.p_LI == (0.1, 0.2, 0.3)


def test_extrinsics_normalizes_rotation():
    ext = Extrinsics(q_LI=(-2.0, 0.0, 0.0, 0.0))
    assert ext.q_LI == (1.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValidationError):
        Extrinsics(q_LI=(0.0, 0.0, 0.0, 0.0))


def test_fit_to_poses_recovers_trajectory(make_trajectory):
    truth = make_trajectory(n=12, dt=0.1, step=0.1, scale=0.3)
    times = np.linspace(0.0, truth.grid.t_end - 1e-9, 200)
    q, p = truth.pose(times)
    fitted = fit_to_poses(list(zip(times, q, p)), truth.grid)
    q_fit, p_fit = fitted.pose(times)
    assert np.max(np.linalg.norm(p_fit - p, axis=1)) < 1e-6
    assert np.max(quat_angle(q_fit, q)) < 1e-6
    np.testing.assert_allclose(fitted.gravity, [0.0, 0.0, -9.81])


def test_fit_to_poses_preconditions():
    grid = KnotGrid(t0=0.0, dt=0.1, n=6)
    q = np.array([1.0, 0.0, 0.0, 0.0])
    p = np.zeros(3)
    with pytest.raises(InsufficientDataError):
        fit_to_poses([(0.0, q, p), (0.1, q, p), (0.2, q, p)], grid)
    with pytest.raises(ValueError):
        fit_to_poses([(0.0, q, p), (0.1, q, p), (0.1, q, p), (0.2, q, p)], grid)
    with pytest.raises(DomainError):
        fit_to_poses([(0.0, q, p), (0.1, q, p), (0.2, q, p), (0.5, q, p)], grid)


def test_trajectory_record_round_trip(make_trajectory):
    traj = make_trajectory()
    record = TrajectoryRecord.model_validate_json(TrajectoryRecord.from_trajectory(traj).model_dump_json())
    restored = record.to_trajectory()
    np.testing.assert_array_equal(restored.pos.ctrl, traj.pos.ctrl)
    np.testing.assert_array_equal(restored.rot.ctrl, traj.rot.ctrl)
    np.testing.assert_array_equal(restored.gravity, traj.gravity)
