"""
Voxel surfel map.

Map points are binned into voxel cells, planar cells are turned into
surfels by RANSAC, and LiDAR points are associated with the surfel of
the cell they fall into.
"""

from .association import Correspondence, CorrespondenceSet, associate, downsample
from .io import SurfelRecord, dump_surfels, load_surfels
from .plane import fit_plane_ransac, plane_likeness, total_least_squares_plane
from .types import LidarPoint, Scan, Surfel, VoxelCell
from .voxel_map import (
    DiscretePoseSource,
    PoseSource,
    SurfelMap,
    TrajectoryPoseSource,
    build_map,
)

__all__ = [
    "Correspondence",
    "CorrespondenceSet",
    "DiscretePoseSource",
    "LidarPoint",
    "PoseSource",
    "Scan",
    "Surfel",
    "SurfelMap",
    "SurfelRecord",
    "TrajectoryPoseSource",
    "VoxelCell",
    "associate",
    "build_map",
    "downsample",
    "dump_surfels",
    "fit_plane_ransac",
    "load_surfels",
    "plane_likeness",
    "total_least_squares_plane",
]
