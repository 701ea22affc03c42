"""Accuracy, excitation and repeatability metrics for calibration runs."""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.config import GRAVITY_MAGNITUDE
from src.rot_init.types import ImuSample, stack_imu
from src.splines.quaternion import quat_angle, quat_conjugate, quat_multiply, quat_rotate
from src.trajectory import Extrinsics, Trajectory


class ExtrinsicError(BaseModel):
    """Error of an extrinsic estimate against ground truth."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "rot_deg": 0.0224,
                "trans_m": 0.0043
            }
        }
    )

    rot_deg: float = Field(..., ge=0.0, description="Geodesic rotation error (deg)")
    trans_m: float = Field(..., ge=0.0, description="Translation error norm (m)")


class TrajectoryError(BaseModel):
    """Absolute trajectory error after aligning the first poses."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "trans_rmse": 0.01,
                "trans_max": 0.03,
                "rot_rmse_deg": 0.1,
                "rot_max_deg": 0.3,
                "samples": 100
            }
        }
    )

    trans_rmse: float = Field(default=0.0, description="Translation RMSE (m)")
    trans_max: float = Field(default=0.0, description="Largest translation error (m)")
    rot_rmse_deg: float = Field(default=0.0, description="Rotation RMSE (deg)")
    rot_max_deg: float = Field(default=0.0, description="Largest rotation error (deg)")
    samples: int = Field(default=0, description="Number of evaluation times")


class ExcitationStats(BaseModel):
    """How strongly a sequence excites the IMU."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "mean_angular_velocity_deg": 47.39,
                "mean_acceleration": 1.2
            }
        }
    )

    mean_angular_velocity_deg: float = Field(default=0.0, description="Mean |omega| (deg/s)")
    mean_acceleration: float = Field(
        default=0.0, description="Mean | |a_m| - 9.81 | (m/s^2)"
    )

    @property
    def mean_angular_velocity(self) -> float:
        """Mean |omega| in rad/s."""
        return float(np.deg2rad(self.mean_angular_velocity_deg))


class ImuResidualStats(BaseModel):
    """Per-axis mean and standard deviation of IMU fitting residuals."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "accel_mean": [0.0, 0.0, 0.0],
                "accel_std": [0.02, 0.02, 0.02],
                "gyro_mean": [0.0, 0.0, 0.0],
                "gyro_std": [0.005, 0.005, 0.005]
            }
        }
    )

    accel_mean: List[float] = Field(default_factory=lambda: [0.0] * 3)
    accel_std: List[float] = Field(default_factory=lambda: [0.0] * 3)
    gyro_mean: List[float] = Field(default_factory=lambda: [0.0] * 3)
    gyro_std: List[float] = Field(default_factory=lambda: [0.0] * 3)


class AxisStats(BaseModel):
    """Mean and sample standard deviation of one quantity across runs.

    ``std`` is ``None`` when fewer than two runs are available.
    """
    mean: float
    std: Optional[float] = None


class RepeatabilityStats(BaseModel):
    """Spread of extrinsic estimates across runs, per axis."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "runs": 10,
                "x": {"mean": 0.1, "std": 0.001}
            }
        }
    )

    runs: int = Field(default=0, ge=0)
    x: AxisStats
    y: AxisStats
    z: AxisStats
    roll: AxisStats
    pitch: AxisStats
    yaw: AxisStats


def extrinsic_error(est: Extrinsics, truth: Extrinsics) -> Tuple[float, float]:
    """Geodesic rotation error in degrees and translation error in meters."""
    rot = float(np.rad2deg(quat_angle(truth.rotation, est.rotation)))
    trans = float(np.linalg.norm(est.translation - truth.translation))
    return rot, trans


def absolute_trajectory_error(
    estimate: Trajectory, truth: Trajectory, times: np.ndarray
) -> TrajectoryError:
    """Compare relative poses from the first evaluation time onward.

    Both trajectories are re-expressed in their own frame at ``times[0]``,
    which removes any difference in world frame.
    """
    times = np.asarray(times, dtype=float)
    if len(times) == 0:
        return TrajectoryError()

    def relative(traj: Trajectory) -> Tuple[np.ndarray, np.ndarray]:
        q, p = traj.pose(times)
        q_inv = quat_conjugate(q[0])
        return quat_multiply(q_inv, q), quat_rotate(q_inv, p - p[0])

    q_est, p_est = relative(estimate)
    q_true, p_true = relative(truth)
    trans = np.linalg.norm(p_est - p_true, axis=1)
    rot = np.rad2deg(quat_angle(q_true, q_est))
    return TrajectoryError(
        trans_rmse=float(np.sqrt(np.mean(trans**2))),
        trans_max=float(np.max(trans)),
        rot_rmse_deg=float(np.sqrt(np.mean(rot**2))),
        rot_max_deg=float(np.max(rot)),
        samples=len(times),
    )


def motion_excitation(imu: Sequence[ImuSample]) -> ExcitationStats:
    """Mean angular speed and mean deviation of specific-force magnitude from gravity."""
    if not imu:
        return ExcitationStats()
    _, gyro, accel = stack_imu(imu)
    omega = np.linalg.norm(gyro, axis=1)
    accel_dev = np.abs(np.linalg.norm(accel, axis=1) - GRAVITY_MAGNITUDE)
    return ExcitationStats(
        mean_angular_velocity_deg=float(np.rad2deg(np.mean(omega))),
        mean_acceleration=float(np.mean(accel_dev)),
    )


def imu_residual_stats(accel_res: np.ndarray, gyro_res: np.ndarray) -> ImuResidualStats:
    if len(accel_res) == 0:
        return ImuResidualStats()
    return ImuResidualStats(
        accel_mean=[float(v) for v in np.mean(accel_res, axis=0)],
        accel_std=[float(v) for v in np.std(accel_res, axis=0)],
        gyro_mean=[float(v) for v in np.mean(gyro_res, axis=0)],
        gyro_std=[float(v) for v in np.std(gyro_res, axis=0)],
    )


def _axis(values: np.ndarray) -> AxisStats:
    std = float(np.std(values, ddof=1)) if len(values) > 1 else None
    return AxisStats(mean=float(np.mean(values)), std=std)


def repeatability(extrinsics: Sequence[Extrinsics]) -> RepeatabilityStats:
    """Per-axis mean and standard deviation of translations (m) and Euler angles (deg).

    Raises:
        ValueError: If ``extrinsics`` is empty
    """
    if not extrinsics:
        raise ValueError("repeatability needs at least one estimate")
    trans = np.array([e.translation for e in extrinsics])
    euler = np.array([e.euler_deg() for e in extrinsics])
    return RepeatabilityStats(
        runs=len(extrinsics),
        x=_axis(trans[:, 0]),
        y=_axis(trans[:, 1]),
        z=_axis(trans[:, 2]),
        roll=_axis(euler[:, 0]),
        pitch=_axis(euler[:, 1]),
        yaw=_axis(euler[:, 2]),
    )
