"""
Ground-truth trajectory generation and IMU and LiDAR measurement simulation.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from src.config import GRAVITY_MAGNITUDE
from src.rot_init import ImuSample
from src.splines import KnotGrid
from src.splines.quaternion import quat_angle, quat_exp, quat_multiply, quat_rotate
from src.surfel_map import Scan
from src.trajectory import Extrinsics, Trajectory, fit_to_poses

from .scene import PlaneScene
from .types import ImuModel, LidarModel, SinusoidParams

logger = logging.getLogger(__name__)

SAMPLES_PER_KNOT = 8
BANDWIDTH_FRACTION = 0.1


def sinusoid_pose(params: SinusoidParams, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Analytic orientation ``exp(A sin(2 pi f t))`` and position ``A sin(2 pi f t)``."""
    t = np.asarray(t, dtype=float)[:, None]
    theta = np.asarray(params.rot_amplitude) * np.sin(2.0 * np.pi * np.asarray(params.rot_frequency) * t)
    position = np.asarray(params.pos_amplitude) * np.sin(2.0 * np.pi * np.asarray(params.pos_frequency) * t)
    return quat_exp(theta), position


def _fit_times(grid: KnotGrid) -> np.ndarray:
    step = grid.dt / SAMPLES_PER_KNOT
    return grid.t0 + step * np.arange(int(round((grid.t_end - grid.t0) / step)))


def sinusoid_fit_residual(
    traj: Trajectory, params: SinusoidParams, times: Optional[np.ndarray] = None
) -> Tuple[float, float]:
    """Largest position (m) and orientation (rad) deviation from the analytic motion."""
    times = _fit_times(traj.grid) if times is None else np.asarray(times, dtype=float)
    q_true, p_true = sinusoid_pose(params, times)
    q, p = traj.pose(times)
    return (
        float(np.max(np.linalg.norm(p - p_true, axis=1))),
        float(np.max(quat_angle(q_true, q))),
    )


def make_sinusoid_trajectory(
    params: Optional[SinusoidParams] = None,
    duration: float = 10.0,
    dt: float = 0.02,
    t0: float = 0.0,
) -> Trajectory:
    """Spline trajectory fitted to dense samples of a sinusoidal motion.

    Args:
        params: Amplitudes and frequencies
        duration: Length of the domain (s)
        dt: Knot spacing (s)
        t0: Start time (s)

    Returns:
        Trajectory with ``n = duration/dt + 3`` control points and gravity
        ``(0, 0, -9.81)``
    """
    params = params or SinusoidParams()
    if params.max_frequency > BANDWIDTH_FRACTION / dt:
        logger.warning(
            f"Motion frequency {params.max_frequency:.2f} Hz exceeds "
            f"{BANDWIDTH_FRACTION / dt:.2f} Hz for knot spacing {dt} s"
        )
    grid = KnotGrid.covering(t0, t0 + duration, dt)
    times = _fit_times(grid)
    quats, positions = sinusoid_pose(params, times)
    traj = fit_to_poses(
        list(zip(times, quats, positions)),
        grid,
        gravity=np.array([0.0, 0.0, -GRAVITY_MAGNITUDE]),
    )
    pos_err, rot_err = sinusoid_fit_residual(traj, params, times)
    logger.info(
        f"Sinusoid trajectory on {grid.n} control points: "
        f"fit residual {pos_err:.2e} m, {rot_err:.2e} rad"
    )
    return traj


def simulate_imu(
    traj: Trajectory,
    model: Optional[ImuModel] = None,
    seed: int = 0,
) -> List[ImuSample]:
    """IMU samples over the trajectory domain at the model rate.

    Gyro noise for all samples is drawn before accelerometer noise.
    """
    model = model or ImuModel()
    grid = traj.grid
    count = int(np.ceil((grid.t_end - grid.t0) * model.rate - 1e-9))
    t = grid.t0 + np.arange(count) / model.rate
    t = t[grid.contains(t)]
    rng = np.random.default_rng(seed)
    gyro_noise = rng.normal(0.0, 1.0, size=(len(t), 3)) * model.sigma_gyro
    accel_noise = rng.normal(0.0, 1.0, size=(len(t), 3)) * model.sigma_accel
    gyro = traj.predict_gyro(t) + np.asarray(model.bias_g) + gyro_noise
    accel = traj.predict_accel(t) + np.asarray(model.bias_a) + accel_noise
    logger.debug(f"Simulated {len(t)} IMU samples at {model.rate:.0f} Hz")
    return [ImuSample(t=ti, gyro=g, accel=a) for ti, g, a in zip(t, gyro, accel)]


def firing_times(model: LidarModel, scan_start: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Timestamp, azimuth and elevation of every firing of one revolution, in firing order."""
    elevations = model.elevations
    beams = len(elevations)
    steps = model.azimuth_steps
    idx = np.arange(steps * beams)
    times = scan_start + idx * model.period / (steps * beams)
    azimuth = 2.0 * np.pi * (idx // beams) / steps
    return times, azimuth, elevations[idx % beams]


def simulate_scan(
    traj: Trajectory,
    ext: Extrinsics,
    scene: PlaneScene,
    model: Optional[LidarModel] = None,
    scan_start: float = 0.0,
    seed: int = 0,
) -> Scan:
    """One revolution with every ray cast from the sensor pose at its own firing time.

    Points are returned in the LiDAR frame at their firing times, so sensor
    motion during the revolution shows up as distortion. Misses are dropped.
    """
    model = model or LidarModel()
    times, azimuth, elevation = firing_times(model, scan_start)
    directions = np.column_stack([
        np.cos(elevation) * np.cos(azimuth),
        np.cos(elevation) * np.sin(azimuth),
        np.sin(elevation),
    ])
    q_wi, p_wi = traj.pose(times)
    q_wl = quat_multiply(q_wi, ext.rotation)
    origins = p_wi + quat_rotate(q_wi, ext.translation)
    ranges, _ = scene.cast(origins, quat_rotate(q_wl, directions))

    rng = np.random.default_rng(seed)
    noisy = ranges + rng.normal(0.0, 1.0, size=len(ranges)) * model.range_noise
    hit = np.isfinite(ranges) & (ranges <= model.max_range) & (noisy > 0.0)
    if not np.any(hit):
        return Scan(t_ref=scan_start, times=np.zeros(0), points=np.zeros((0, 3)))
    points = directions[hit] * noisy[hit, None]
    return Scan(t_ref=float(times[hit][0]), times=times[hit], points=points)
