"""
Extrinsic rotation initialization.

A rotation spline is fitted to raw gyroscope data and the extrinsic
rotation is recovered by quaternion hand-eye alignment against the
rotations reported by LiDAR odometry.
"""

from .gyro_fit import estimate_gyro_bias, fit_gyro_spline, relative_rotation
from .handeye import (
    handeye_weight,
    left_quat_matrix,
    make_pairs,
    right_quat_matrix,
    solve_handeye,
)
from .initializer import RotationInit, initialize_rotation
from .types import ImuSample, RotPair, stack_imu

__all__ = [
    "ImuSample",
    "RotPair",
    "RotationInit",
    "estimate_gyro_bias",
    "fit_gyro_spline",
    "handeye_weight",
    "initialize_rotation",
    "left_quat_matrix",
    "make_pairs",
    "relative_rotation",
    "right_quat_matrix",
    "solve_handeye",
    "stack_imu",
]
