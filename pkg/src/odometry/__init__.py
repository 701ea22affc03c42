"""
LiDAR pose sources.

Scan poses come either from noisy ground truth in simulation or from
point-to-plane ICP against an incrementally built surfel map.
"""

from .icp import IcpOdometry, icp_point_to_plane
from .io import read_poses_csv, write_poses_csv
from .oracle import lidar_poses, oracle_odometry
from .types import ScanPose, compose_pose, relative_pose

__all__ = [
    "IcpOdometry",
    "ScanPose",
    "compose_pose",
    "icp_point_to_plane",
    "lidar_poses",
    "oracle_odometry",
    "read_poses_csv",
    "relative_pose",
    "write_poses_csv",
]
