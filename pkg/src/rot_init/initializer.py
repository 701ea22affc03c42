"""
End-to-end extrinsic rotation initialization.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from src.splines import KnotGrid, SplineSO3
from src.splines.quaternion import quat_conjugate, quat_multiply

from .gyro_fit import estimate_gyro_bias, fit_gyro_spline, relative_rotation
from .handeye import make_pairs, solve_handeye
from .types import ImuSample, RotPair

logger = logging.getLogger(__name__)


@dataclass
class RotationInit:
    """Result of rotation initialization.

    Attributes:
        gyro_spline: Rotation spline fitted to the bias-corrected gyroscope
        q_LI: Initial extrinsic rotation
        pairs: Weighted rotation pairs used by the solver
        bias_g: Constant gyro bias removed before the final fit (rad/s)
    """
    gyro_spline: SplineSO3
    q_LI: np.ndarray
    pairs: List[RotPair]
    bias_g: np.ndarray = field(default_factory=lambda: np.zeros(3))


def _handeye(
    spline: SplineSO3, times: np.ndarray, rotations: np.ndarray, threshold: float
) -> Tuple[List[RotPair], np.ndarray]:
    dq_imu = [relative_rotation(spline, a, b) for a, b in zip(times[:-1], times[1:])]
    dq_lidar = [
        quat_multiply(quat_conjugate(a), b) for a, b in zip(rotations[:-1], rotations[1:])
    ]
    pairs = make_pairs(dq_imu, dq_lidar, threshold)
    return pairs, solve_handeye(pairs)


def initialize_rotation(
    samples: Sequence[ImuSample],
    scan_times: np.ndarray,
    scan_rotations: np.ndarray,
    grid: KnotGrid,
    threshold: float = 0.02,
    estimate_bias: bool = True,
) -> RotationInit:
    """Fit the gyro spline and solve hand-eye against consecutive scan rotations.

    With ``estimate_bias`` the first hand-eye solution is used to estimate
    a constant gyro bias against the LiDAR rotations; the spline is then
    refitted to the corrected gyro and hand-eye is solved again.

    Args:
        samples: Raw IMU samples
        scan_times: Reference time of every scan with a pose
        scan_rotations: LiDAR orientation of every scan, ``(K, 4)``
        grid: Knot grid for the gyro spline
        threshold: Hand-eye outlier threshold (rad)
        estimate_bias: Estimate and remove a constant gyro bias

    Returns:
        Gyro spline, extrinsic rotation, the pairs it was solved from and the gyro bias
    """
    spline = fit_gyro_spline(samples, grid)
    scan_times = np.asarray(scan_times, dtype=float)
    inside = grid.contains(scan_times)
    times = scan_times[inside]
    rotations = np.asarray(scan_rotations, dtype=float)[inside]
    pairs, q_LI = _handeye(spline, times, rotations, threshold)
    bias_g = np.zeros(3)
    if estimate_bias:
        bias_g, _ = estimate_gyro_bias(samples, times, rotations, q_LI)
        spline = fit_gyro_spline(samples, grid, bias=bias_g)
        pairs, q_LI = _handeye(spline, times, rotations, threshold)
    logger.info(
        f"Initialized extrinsic rotation from {len(pairs)} scan pairs: "
        f"q_LI = {np.array2string(q_LI, precision=5)}"
    )
    return RotationInit(gyro_spline=spline, q_LI=q_LI, pairs=pairs, bias_g=bias_g)
