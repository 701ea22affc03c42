"""Tests for the gyro spline fit and the quaternion hand-eye solver."""

import numpy as np
import pytest

from src.core.errors import InsufficientDataError, ObservabilityError
from src.rot_init import (
    ImuSample,
    RotPair,
    estimate_gyro_bias,
    fit_gyro_spline,
    handeye_weight,
    initialize_rotation,
    left_quat_matrix,
    make_pairs,
    relative_rotation,
    right_quat_matrix,
    solve_handeye,
)
from src.splines import KnotGrid, quat_angle, quat_conjugate, quat_exp, quat_multiply


def conjugate_by(q_LI: np.ndarray, dq: np.ndarray) -> np.ndarray:
    """LiDAR relative rotation seen through the extrinsic rotation."""
    return quat_multiply(quat_multiply(quat_conjugate(q_LI), dq), q_LI)


def random_pairs(rng, q_LI, count=20, noise_rad=0.0):
    dq_imu = quat_exp(rng.normal(scale=0.3, size=(count, 3)))
    dq_lidar = conjugate_by(q_LI, dq_imu)
    if noise_rad:
        dq_imu = quat_multiply(dq_imu, quat_exp(rng.normal(scale=noise_rad, size=(count, 3))))
        dq_lidar = quat_multiply(dq_lidar, quat_exp(rng.normal(scale=noise_rad, size=(count, 3))))
    return list(dq_imu), list(dq_lidar)


def gyro_samples(spline, rate=400.0, bias=(0.0, 0.0, 0.0)):
    t = np.arange(0.0, spline.grid.t_end - 1e-9, 1.0 / rate)
    omega = spline.angular_velocity_body(t) + np.asarray(bias)
    return [ImuSample(t=ti, gyro=w, accel=np.zeros(3)) for ti, w in zip(t, omega)]


def test_quat_matrices_match_product(rng):
    p, q = quat_exp(rng.normal(size=(2, 3)))
    np.testing.assert_allclose(left_quat_matrix(q) @ p, quat_multiply(q, p), atol=1e-15)
    np.testing.assert_allclose(right_quat_matrix(q) @ p, quat_multiply(p, q), atol=1e-15)


def test_weight_is_one_below_threshold():
    dq = quat_exp(np.array([0.0, 0.0, 0.5]))
    assert handeye_weight(dq, dq, 0.02) == 1.0
    other = quat_exp(np.array([0.0, 0.0, 0.6]))
    assert handeye_weight(dq, other, 0.02) == pytest.approx(0.02 / 0.1)


def test_noiseless_recovery(rng):
    q_LI = quat_exp(rng.normal(size=3))
    q_LI = q_LI if q_LI[0] >= 0 else -q_LI
    dq_imu, dq_lidar = random_pairs(rng, q_LI)
    q = solve_handeye(make_pairs(dq_imu, dq_lidar, 0.02))
    assert quat_angle(q, q_LI) < 1e-6
    assert q[0] >= 0.0


def test_noisy_recovery_over_seeded_runs():
    """Relative-rotation noise of 0.2 degrees keeps the estimate within 0.5 degrees."""
    for seed in range(10):
        rng = np.random.default_rng(seed)
        q_LI = quat_exp(rng.normal(size=3))
        dq_imu, dq_lidar = random_pairs(rng, q_LI, count=50, noise_rad=np.deg2rad(0.2))
        q = solve_handeye(make_pairs(dq_imu, dq_lidar, 0.02))
        assert np.rad2deg(quat_angle(q, q_LI)) < 0.5


def test_single_axis_motion_is_unobservable(rng):
    q_LI = quat_exp(np.array([0.2, -0.1, 0.3]))
    angles = rng.uniform(0.1, 0.5, size=10)
    dq_imu = [quat_exp(np.array([0.0, 0.0, a])) for a in angles]
    dq_lidar = [conjugate_by(q_LI, dq) for dq in dq_imu]
    with pytest.raises(ObservabilityError) as exc:
        solve_handeye(make_pairs(dq_imu, dq_lidar, 0.02))
    assert exc.value.directions


def test_too_few_pairs():
    q = np.array([1.0, 0.0, 0.0, 0.0])
    with pytest.raises(InsufficientDataError):
        solve_handeye([RotPair(dq_imu=q, dq_lidar=q)])


def test_outlier_is_down_weighted(rng):
    q_LI = quat_exp(np.array([0.1, 0.2, 0.3]))
    dq_imu, dq_lidar = random_pairs(rng, q_LI, count=30)
    dq_imu[5] = quat_exp(np.array([0.0, 0.0, 0.1]))
    dq_lidar[5] = conjugate_by(q_LI, quat_exp(np.array([0.0, 0.0, 0.6])))
    pairs = make_pairs(dq_imu, dq_lidar, 0.02)
    assert pairs[5].weight == pytest.approx(0.04)
    assert np.rad2deg(quat_angle(solve_handeye(pairs), q_LI)) < 1.0


def test_gyro_spline_reproduces_body_rate(make_so3_spline):
    truth = make_so3_spline(n=12, dt=0.1, step=0.1)
    spline = fit_gyro_spline(gyro_samples(truth), truth.grid)
    np.testing.assert_allclose(spline.ctrl[0], [1.0, 0.0, 0.0, 0.0], atol=1e-12)
    t = np.linspace(0.0, truth.grid.t_end - 1e-6, 50)
    assert np.max(np.abs(spline.angular_velocity_body(t) - truth.angular_velocity_body(t))) < 1e-4
    for a, b in [(0.05, 0.35), (0.2, 0.8)]:
        assert quat_angle(relative_rotation(spline, a, b), relative_rotation(truth, a, b)) < 1e-5


def test_gyro_spline_needs_samples(make_so3_spline):
    truth = make_so3_spline(n=12, dt=0.1)
    with pytest.raises(InsufficientDataError):
        fit_gyro_spline(gyro_samples(truth, rate=10.0), truth.grid)


def test_initialize_rotation_noiseless(make_so3_spline):
    truth = make_so3_spline(n=25, dt=0.1, step=0.15)
    q_LI = quat_exp(np.array([0.17, 0.17, 0.17]))
    scan_times = np.arange(0.0, truth.grid.t_end - 0.05, 0.1)
    scan_rotations = quat_multiply(truth.orientation(scan_times), q_LI)
    init = initialize_rotation(gyro_samples(truth), scan_times, scan_rotations, truth.grid)
    assert quat_angle(init.q_LI, q_LI) < 1e-4
    assert len(init.pairs) == len(scan_times) - 1
    assert isinstance(init.gyro_spline.grid, KnotGrid)


def test_uniform_weight_scaling_leaves_solution_unchanged(rng):
    q_LI = quat_exp(np.array([0.3, -0.2, 0.1]))
    dq_imu, dq_lidar = random_pairs(rng, q_LI, count=40, noise_rad=np.deg2rad(0.5))
    pairs = make_pairs(dq_imu, dq_lidar, 0.002)
    assert any(p.weight < 1.0 for p in pairs)
    scaled = [RotPair(dq_imu=p.dq_imu, dq_lidar=p.dq_lidar, weight=0.3 * p.weight) for p in pairs]
    np.testing.assert_allclose(solve_handeye(scaled), solve_handeye(pairs), atol=1e-10)


def lidar_rotations(truth, q_LI, times):
    return quat_multiply(truth.orientation(times), q_LI)


def test_gyro_bias_recovered_against_lidar_rotations(make_so3_spline):
    truth = make_so3_spline(n=63, dt=0.1, step=0.15)
    bias = np.array([0.02, -0.015, 0.01])
    q_LI = quat_exp(np.array([0.17, 0.17, 0.17]))
    scan_times = np.arange(0.0, truth.grid.t_end - 0.05, 0.1)
    seed = quat_multiply(q_LI, quat_exp(np.deg2rad([0.5, -0.5, 0.3])))
    estimate, q = estimate_gyro_bias(
        gyro_samples(truth, bias=bias), scan_times, lidar_rotations(truth, q_LI, scan_times), seed
    )
    np.testing.assert_allclose(estimate, bias, atol=1e-3)
    assert quat_angle(q, q_LI) < np.deg2rad(0.05)


def test_gyro_bias_needs_three_scans(make_so3_spline):
    truth = make_so3_spline(n=12, dt=0.1)
    q_LI = quat_exp(np.array([0.1, 0.0, 0.0]))
    scan_times = np.array([0.0, 0.1])
    with pytest.raises(InsufficientDataError):
        estimate_gyro_bias(
            gyro_samples(truth), scan_times, lidar_rotations(truth, q_LI, scan_times), q_LI
        )


def test_initialize_rotation_removes_gyro_bias(make_so3_spline):
    truth = make_so3_spline(n=63, dt=0.1, step=0.15)
    bias = np.array([0.02, 0.02, 0.02])
    q_LI = quat_exp(np.array([0.17, 0.17, 0.17]))
    scan_times = np.arange(0.0, truth.grid.t_end - 0.05, 0.1)
    rotations = lidar_rotations(truth, q_LI, scan_times)
    samples = gyro_samples(truth, bias=bias)

    init = initialize_rotation(samples, scan_times, rotations, truth.grid)
    np.testing.assert_allclose(init.bias_g, bias, atol=1e-3)
    assert quat_angle(init.q_LI, q_LI) < np.deg2rad(0.05)
    for a, b in [(0.5, 2.5), (1.0, 5.5)]:
        corrected = relative_rotation(init.gyro_spline, a, b)
        assert quat_angle(corrected, relative_rotation(truth, a, b)) < 5e-3

    blind = initialize_rotation(samples, scan_times, rotations, truth.grid, estimate_bias=False)
    np.testing.assert_array_equal(blind.bias_g, np.zeros(3))
