"""
Tests for the calibration problem, its Jacobian and the LM solver.

Problems are synthesized from a known trajectory: IMU samples are exact
predictions and every LiDAR point lies on a plane through its own mapped
position, so the true state has zero cost.
"""

from unittest.mock import patch

import numpy as np
import pytest

from src.config import NoiseConfig, SolverOptions
from src.core.errors import ObservabilityError
from src.optimizer import (
    CalibState,
    Problem,
    StateLayout,
    build_jacobian,
    build_normal_equations,
    check_observability,
    huber_loss,
    huber_weights,
    residual_accel,
    residual_gyro,
    residual_lidar,
    solve_lm,
)
from src.optimizer.solver import MAX_LAMBDA
from src.rot_init import ImuSample
from src.splines import KnotGrid, SplineR3, SplineSO3, quat_angle, quat_exp
from src.surfel_map import CorrespondenceSet, Surfel
from src.trajectory import Extrinsics, Trajectory, lidar_point_to_map

NOISE = NoiseConfig(sigma_accel=0.02, sigma_gyro=0.005, sigma_lidar=0.01)


def exact_imu(traj: Trajectory, rate: float = 200.0):
    t = np.arange(traj.grid.t0, traj.grid.t_end - 1e-9, 1.0 / rate)
    gyro = traj.predict_gyro(t)
    accel = traj.predict_accel(t)
    return [ImuSample(t=ti, gyro=g, accel=a) for ti, g, a in zip(t, gyro, accel)]


def exact_correspondences(traj, ext, rng, count=300, planes=12, t_map=0.05):
    """Points on random planes through their true map positions."""
    times = rng.uniform(traj.grid.t0, traj.grid.t_end - 1e-9, size=count)
    points = rng.normal(scale=3.0, size=(count, 3))
    mapped = lidar_point_to_map(traj, ext, points, times, t_map)
    normals = rng.normal(size=(planes, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    index = np.arange(count) % planes
    offsets = -np.einsum("ij,ij->i", mapped, normals[index])
    # one surfel per point keeps each plane exact for its point
    surfels = [Surfel(normal=normals[index[k]], d=float(offsets[k]), planarity=1.0) for k in range(count)]
    return CorrespondenceSet(
        points=points,
        times=times,
        map_points=mapped,
        surfel_index=np.arange(count),
        surfels=surfels,
        t_map=t_map,
    )


@pytest.fixture
def synthetic(make_trajectory, truth_extrinsics, rng):
    traj = make_trajectory(n=12, dt=0.1, step=0.3, scale=0.5)
    problem = Problem(
        imu_samples=exact_imu(traj),
        correspondences=exact_correspondences(traj, truth_extrinsics, rng),
        noise=NOISE,
        grid=traj.grid,
    )
    truth = CalibState.from_trajectory(traj, truth_extrinsics)
    return problem, truth


def perturbed(state: CalibState, rng, scale: float = 1.0) -> CalibState:
    layout = StateLayout(state.grid.n)
    delta = np.zeros(layout.size)
    delta[layout.ext_rot:layout.ext_rot + 3] = np.deg2rad(2.0) * scale * np.array([1.0, -0.5, 0.7])
    delta[layout.ext_trans:layout.ext_trans + 3] = 0.02 * scale * np.array([1.0, 1.0, -1.0])
    delta[layout.rot:layout.bias_a] = rng.normal(scale=0.005 * scale, size=layout.bias_a - layout.rot)
    return state.retract(delta, layout)


def whitened(problem: Problem, state: CalibState) -> np.ndarray:
    ra, rg, rl = problem.residuals(state)
    return np.concatenate([
        ra.reshape(-1) / NOISE.sigma_accel,
        rg.reshape(-1) / NOISE.sigma_gyro,
        rl / NOISE.sigma_lidar,
    ])


def test_huber_loss_and_weights():
    r = np.array([0.01, -0.1])
    np.testing.assert_allclose(huber_loss(r, 0.05), [1e-4, 0.0075])
    np.testing.assert_allclose(huber_weights(r, 0.05), [1.0, 0.5])


def test_layout_columns():
    layout = StateLayout(12)
    assert layout.size == 6 + 33 + 33 + 6 + 2
    assert len(layout.labels()) == layout.size
    assert layout.labels()[layout.gravity] == "gravity_alpha"
    assert StateLayout(12, estimate_gravity=False).size == layout.size - 2
    assert len(layout.ctrl_columns) + len(layout.calib_columns) == layout.size


def test_zero_increment_keeps_state(synthetic):
    _, truth = synthetic
    same = truth.retract(np.zeros(StateLayout(truth.grid.n).size), StateLayout(truth.grid.n))
    np.testing.assert_allclose(same.rot_ctrl, truth.rot_ctrl, atol=1e-15)
    np.testing.assert_allclose(same.pos_ctrl, truth.pos_ctrl, atol=1e-15)
    assert same.ext.q_LI == pytest.approx(truth.ext.q_LI)


def test_truth_has_zero_cost(synthetic):
    problem, truth = synthetic
    assert problem.cost(truth) < 1e-10


def test_single_residuals_match_batch(synthetic, rng):
    problem, truth = synthetic
    state = perturbed(truth, rng)
    ra, rg, rl = problem.residuals(state)
    samples = problem.imu_samples
    for k in (0, 17, len(samples) - 1):
        np.testing.assert_allclose(residual_accel(state, samples[k]).reshape(-1), ra[k], atol=1e-10)
        np.testing.assert_allclose(residual_gyro(state, samples[k]).reshape(-1), rg[k], atol=1e-12)
    for k in (0, 99):
        assert residual_lidar(state, problem.correspondences[k]) == pytest.approx(rl[k], abs=1e-10)


def test_jacobian_matches_finite_differences(synthetic, rng):
    problem, truth = synthetic
    state = perturbed(truth, rng)
    layout = StateLayout(state.grid.n)
    jac, residual = build_jacobian(problem, state, layout)
    np.testing.assert_allclose(residual, whitened(problem, state), atol=1e-9)

    h = 1e-6
    fd = np.zeros(jac.shape)
    for k in range(layout.size):
        e = np.zeros(layout.size)
        e[k] = h
        fd[:, k] = (whitened(problem, state.retract(e, layout)) - whitened(problem, state.retract(-e, layout))) / (2 * h)
    dense = jac.toarray()
    scale = np.abs(fd).max()
    np.testing.assert_allclose(dense, fd, rtol=1e-4, atol=1e-5 * scale)


def test_threaded_assembly_matches_serial(synthetic, rng):
    problem, truth = synthetic
    state = perturbed(truth, rng)
    serial = build_normal_equations(problem, state, threads=1)
    threaded = build_normal_equations(problem, state, threads=3)
    np.testing.assert_allclose(threaded.H.toarray(), serial.H.toarray(), rtol=1e-10, atol=1e-6)
    np.testing.assert_allclose(threaded.g, serial.g, rtol=1e-10, atol=1e-6)
    assert threaded.cost == pytest.approx(serial.cost, rel=1e-12)
    assert serial.cost == pytest.approx(problem.cost(state), rel=1e-12)


def test_lm_cost_is_monotone_and_recovers_extrinsics(synthetic, rng):
    problem, truth = synthetic
    init = perturbed(truth, rng)
    state, report = solve_lm(problem, init, SolverOptions(max_iters=50))
    accepted = [report.initial_cost] + [it.cost for it in report.iterations if it.accepted]
    assert all(b < a for a, b in zip(accepted, accepted[1:]))
    assert report.final_cost < 1e-6 * report.initial_cost
    assert np.rad2deg(quat_angle(state.ext.rotation, truth.ext.rotation)) < 0.01
    assert np.linalg.norm(state.ext.translation - truth.ext.translation) < 1e-3
    np.testing.assert_allclose(state.rot_ctrl[0], [1.0, 0.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(state.pos_ctrl[0], 0.0, atol=1e-12)


def test_lm_started_at_truth_stays_there(synthetic):
    problem, truth = synthetic
    state, report = solve_lm(problem, truth, check=False)
    assert report.final_cost < 1e-10
    assert quat_angle(state.ext.rotation, truth.ext.rotation) < 1e-8
    np.testing.assert_allclose(state.ext.translation, truth.ext.translation, atol=1e-8)


def test_stationary_data_is_unobservable(truth_extrinsics, rng):
    n = 10
    grid = KnotGrid(t0=0.0, dt=0.1, n=n)
    traj = Trajectory(
        rot=SplineSO3(grid, np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))),
        pos=SplineR3(grid, np.zeros((n, 3))),
        gravity=np.array([0.0, 0.0, -9.81]),
    )
    problem = Problem(
        imu_samples=exact_imu(traj),
        correspondences=exact_correspondences(traj, truth_extrinsics, rng),
        noise=NOISE,
        grid=grid,
    )
    init = CalibState.from_trajectory(traj, Extrinsics.from_arrays(quat_exp(np.array([0.1, 0.0, 0.0])), np.zeros(3)))
    with pytest.raises(ObservabilityError) as exc:
        solve_lm(problem, init)
    assert exc.value.directions

    system = build_normal_equations(problem, init)
    with pytest.raises(ObservabilityError):
        check_observability(system.H, StateLayout(n))


@pytest.mark.parametrize("factor", [0.5, 3.0])
def test_lidar_sigma_scales_lidar_cost_only(synthetic, rng, factor):
    problem, truth = synthetic
    state = perturbed(truth, rng)
    ra, rg, _ = problem.residuals(state)
    imu_cost = 0.5 * (np.sum(ra * ra) / NOISE.sigma_accel**2 + np.sum(rg * rg) / NOISE.sigma_gyro**2)
    lidar_cost = problem.cost(state) - imu_cost
    assert lidar_cost > 0.0

    noise = NOISE.model_copy(update={"sigma_lidar": factor * NOISE.sigma_lidar})
    scaled = Problem(
        imu_samples=problem.imu_samples,
        correspondences=problem.correspondences,
        noise=noise,
        grid=problem.grid,
    )
    assert scaled.cost(state) - imu_cost == pytest.approx(lidar_cost / factor**2, rel=1e-9)


def test_stall_at_maximum_damping_is_not_convergence(synthetic, rng):
    problem, truth = synthetic
    init = perturbed(truth, rng, scale=0.1)
    layout = StateLayout(truth.grid.n)
    uphill = np.full(layout.size, 0.3)
    opts = SolverOptions(max_iters=100)
    with patch("src.optimizer.solver._solve_damped", return_value=uphill):
        state, report = solve_lm(problem, init, opts, check=False)
    assert not report.converged
    assert report.termination == "no cost decrease at maximum damping"
    assert not any(it.accepted for it in report.iterations)
    assert report.iterations[-1].damping * opts.lambda_up > MAX_LAMBDA
    assert report.final_cost == pytest.approx(report.initial_cost)
    assert state.ext == init.ext
