"""
Synthetic odometry: ground-truth LiDAR poses with seeded noise.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.splines.quaternion import quat_conjugate, quat_exp, quat_multiply
from src.trajectory import Extrinsics, Trajectory, lidar_point_to_map

from .types import ScanPose

logger = logging.getLogger(__name__)


def lidar_poses(
    truth: Trajectory,
    ext: Extrinsics,
    times: np.ndarray,
    t_map: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Exact LiDAR orientations and origins in the map frame at ``times``."""
    times = np.asarray(times, dtype=float)
    q_t = truth.rot.orientation(times)
    q_0 = truth.rot.orientation(float(t_map))
    q_LI = ext.rotation
    q = quat_multiply(
        quat_multiply(quat_conjugate(q_LI), quat_conjugate(q_0)),
        quat_multiply(q_t, q_LI),
    )
    origins = lidar_point_to_map(truth, ext, np.zeros((len(times), 3)), times, t_map)
    return q, origins


def oracle_odometry(
    truth: Trajectory,
    ext: Extrinsics,
    scan_times: Sequence[float],
    noise: Tuple[float, float] = (0.0, 0.0),
    seed: int = 0,
    t_map: Optional[float] = None,
) -> List[ScanPose]:
    """Ground-truth scan poses perturbed by Gaussian rotation and translation noise.

    Args:
        truth: Ground-truth IMU trajectory
        ext: Ground-truth extrinsics
        scan_times: Scan reference times
        noise: ``(sigma_rot rad, sigma_trans m)`` per axis
        seed: Random seed
        t_map: Map reference time, defaults to the first scan time

    Returns:
        One pose per scan time
    """
    times = np.asarray(scan_times, dtype=float)
    t_map = float(times[0]) if t_map is None else float(t_map)
    q, p = lidar_poses(truth, ext, times, t_map)
    sigma_rot, sigma_trans = noise
    rng = np.random.default_rng(seed)
    rot_noise = rng.normal(0.0, 1.0, size=(len(times), 3)) * sigma_rot
    trans_noise = rng.normal(0.0, 1.0, size=(len(times), 3)) * sigma_trans
    q = quat_multiply(q, quat_exp(rot_noise))
    p = p + trans_noise
    logger.info(
        f"Oracle odometry for {len(times)} scans "
        f"(sigma_rot {sigma_rot:.4f} rad, sigma_trans {sigma_trans:.4f} m)"
    )
    return [ScanPose(t=t, q=qk, p=pk) for t, qk, pk in zip(times, q, p)]
