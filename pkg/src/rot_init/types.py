"""
Type definitions for rotation initialization.

This module defines the raw IMU sample and the relative-rotation pair
consumed by the hand-eye solver.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class ImuSample:
    """One raw IMU measurement.

    Attributes:
        t: Timestamp (s)
        gyro: Angular velocity (rad/s) in the IMU frame
        accel: Specific force (m/s^2) in the IMU frame
    """
    t: float
    gyro: np.ndarray
    accel: np.ndarray

    def __post_init__(self) -> None:
        gyro = np.asarray(self.gyro, dtype=float).reshape(3)
        accel = np.asarray(self.accel, dtype=float).reshape(3)
        if not (np.isfinite(self.t) and np.all(np.isfinite(gyro)) and np.all(np.isfinite(accel))):
            raise ValueError(f"non-finite IMU sample at t={self.t}")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "gyro", gyro)
        object.__setattr__(self, "accel", accel)


@dataclass(frozen=True, eq=False)
class RotPair:
    """Relative rotations of the IMU and LiDAR over one scan interval.

    Attributes:
        dq_imu: IMU rotation from the fitted gyro spline
        dq_lidar: LiDAR rotation from odometry
        weight: Outlier weight in ``(0, 1]``
    """
    dq_imu: np.ndarray
    dq_lidar: np.ndarray
    weight: float = 1.0


def stack_imu(samples: Sequence[ImuSample]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Timestamps, gyro and accel arrays of a sample sequence.

    Raises:
        ValueError: If timestamps are not strictly increasing
    """
    t = np.array([s.t for s in samples], dtype=float)
    gyro = np.array([s.gyro for s in samples], dtype=float).reshape(-1, 3)
    accel = np.array([s.accel for s in samples], dtype=float).reshape(-1, 3)
    if np.any(np.diff(t) <= 0.0):
        raise ValueError("IMU timestamps must be strictly increasing")
    return t, gyro, accel
