"""
Continuous-time IMU trajectory.

A trajectory pairs a rotation spline and a position spline on one knot
grid with a gravity vector, and predicts what an IMU and a LiDAR rigidly
attached to it would observe.
"""

from .fitting import fit_to_poses
from .io import TrajectoryRecord
from .trajectory import (
    Extrinsics,
    Trajectory,
    dof_from_gravity,
    gravity_dof_jacobian,
    gravity_from_dof,
    lidar_point_to_map,
    predict_accel,
    predict_gyro,
    transform_to_map,
)

__all__ = [
    "Extrinsics",
    "Trajectory",
    "TrajectoryRecord",
    "dof_from_gravity",
    "fit_to_poses",
    "gravity_dof_jacobian",
    "gravity_from_dof",
    "lidar_point_to_map",
    "predict_accel",
    "predict_gyro",
    "transform_to_map",
]
