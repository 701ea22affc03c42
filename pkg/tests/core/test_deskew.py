"""Tests for scan motion compensation."""

import numpy as np
import pytest

from src.core.deskew import DeskewMode, deskew_scan, rotation_only_trajectory
from src.core.errors import DomainError
from src.splines import KnotGrid, SplineR3, SplineSO3
from src.surfel_map import Scan
from src.trajectory import Trajectory, lidar_point_to_map


def translating_trajectory(velocity, n=10, dt=0.1) -> Trajectory:
    grid = KnotGrid(t0=0.0, dt=dt, n=n)
    return Trajectory(
        rot=SplineSO3(grid, np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))),
        pos=SplineR3(grid, np.outer(grid.knot_time(np.arange(n)), velocity)),
        gravity=np.zeros(3),
    )


def sweep(rng, t_ref=0.2, count=50, period=0.1) -> Scan:
    times = t_ref + np.sort(rng.uniform(0.0, period, size=count))
    times[0] = t_ref
    return Scan(t_ref, times, rng.normal(scale=5.0, size=(count, 3)))


def test_stationary_scan_is_unchanged(truth_extrinsics, rng):
    scan = sweep(rng)
    traj = translating_trajectory(np.zeros(3))
    out = deskew_scan(scan, traj, truth_extrinsics)
    np.testing.assert_allclose(out.points, scan.points, atol=1e-12)
    np.testing.assert_array_equal(out.times, scan.times)


def test_full_mode_matches_per_point_transform(make_trajectory, truth_extrinsics, rng):
    traj = make_trajectory()
    scan = sweep(rng, t_ref=0.3)
    out = deskew_scan(scan, traj, truth_extrinsics, DeskewMode.FULL)
    expected = lidar_point_to_map(traj, truth_extrinsics, scan.points, scan.times, scan.t_ref)
    np.testing.assert_allclose(out.points, expected, atol=1e-12)
    assert out.t_ref == scan.t_ref


def test_constant_velocity_shift(truth_extrinsics, rng):
    """A translating sensor sees later points shifted back along its velocity."""
    v = np.array([1.0, -0.5, 0.2])
    traj = translating_trajectory(v)
    scan = sweep(rng)
    out = deskew_scan(scan, traj, truth_extrinsics)
    R_LI = truth_extrinsics.matrix
    shift = np.outer(scan.times - scan.t_ref, R_LI.T @ v)
    np.testing.assert_allclose(out.points, scan.points + shift, atol=1e-10)


def test_rotation_mode_ignores_translation(truth_extrinsics, rng):
    traj = translating_trajectory(np.array([2.0, 0.0, 0.0]))
    scan = sweep(rng)
    out = deskew_scan(scan, traj, truth_extrinsics, DeskewMode.ROTATION)
    np.testing.assert_allclose(out.points, scan.points, atol=1e-12)


def test_rotation_only_trajectory(make_so3_spline):
    rot = make_so3_spline()
    traj = rotation_only_trajectory(rot)
    t = np.linspace(0.0, rot.grid.t_end - 1e-9, 9)
    q, p = traj.pose(t)
    np.testing.assert_array_equal(q, rot.orientation(t))
    np.testing.assert_array_equal(p, 0.0)


def test_empty_scan_passes_through(truth_extrinsics):
    scan = Scan(0.1, np.zeros(0), np.zeros((0, 3)))
    assert deskew_scan(scan, translating_trajectory(np.ones(3)), truth_extrinsics) is scan


def test_points_outside_domain(truth_extrinsics, rng):
    traj = translating_trajectory(np.ones(3), n=5)
    scan = sweep(rng, t_ref=0.15)
    with pytest.raises(DomainError):
        deskew_scan(scan, traj, truth_extrinsics)
