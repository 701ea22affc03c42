"""
Motion compensation of raw scans.
"""

import logging
from enum import Enum

import numpy as np

from src.splines import SplineR3, SplineSO3
from src.surfel_map import Scan
from src.trajectory import Extrinsics, Trajectory, transform_to_map

logger = logging.getLogger(__name__)


class DeskewMode(str, Enum):
    """Which part of the motion is removed from a scan."""
    ROTATION = "rotation"
    FULL = "full"


def rotation_only_trajectory(rot: SplineSO3) -> Trajectory:
    """Trajectory with the given orientation, no translation and no gravity."""
    return Trajectory(
        rot=rot,
        pos=SplineR3(rot.grid, np.zeros((rot.grid.n, 3))),
        gravity=np.zeros(3),
    )


def deskew_scan(
    scan: Scan,
    traj: Trajectory,
    ext: Extrinsics,
    mode: DeskewMode = DeskewMode.FULL,
) -> Scan:
    """Express every point in the LiDAR frame at the scan's reference time.

    Args:
        scan: Raw scan
        traj: IMU trajectory covering the scan interval
        ext: LiDAR-IMU extrinsics
        mode: ``ROTATION`` keeps the sensor position frozen over the scan

    Returns:
        Scan with the same timestamps and compensated points

    Raises:
        DomainError: If a point time lies outside the trajectory domain
    """
    if len(scan) == 0:
        return scan
    q_j, p_j = traj.pose(scan.times)
    q_0, p_0 = traj.pose(scan.t_ref)
    if mode is DeskewMode.ROTATION:
        p_j = np.zeros_like(p_j)
        p_0 = np.zeros(3)
    points = transform_to_map(q_j, p_j, q_0, p_0, ext.rotation, ext.translation, scan.points)
    return scan.with_points(points)
