"""
Voxel map accumulation and surfel extraction.

Points are binned by floor division of their map-frame coordinates; each
bin keeps running moments so the map can grow scan by scan.
"""

import logging
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from src.config import SurfelConfig
from src.splines.quaternion import quat_rotate
from src.trajectory import Extrinsics, Trajectory, lidar_point_to_map

from .plane import cell_rng, fit_plane_ransac, plane_likeness
from .types import CellIndex, Scan, Surfel, VoxelCell

logger = logging.getLogger(__name__)

KEY_BITS = 21
KEY_OFFSET = 1 << (KEY_BITS - 1)


def encode_cells(indices: np.ndarray) -> np.ndarray:
    """Pack integer cell indices ``(N, 3)`` into sortable int64 keys."""
    shifted = indices.astype(np.int64) + KEY_OFFSET
    return (shifted[:, 0] << (2 * KEY_BITS)) | (shifted[:, 1] << KEY_BITS) | shifted[:, 2]


class PoseSource(Protocol):
    """Maps a scan's points into the map frame."""

    def to_map(self, index: int, scan: Scan) -> np.ndarray:
        ...


class DiscretePoseSource:
    """One rigid pose per scan, optionally after per-scan deskewing.

    Args:
        rotations: Scan orientations in the map frame, ``(K, 4)``
        positions: Scan origins in the map frame, ``(K, 3)``
    """

    def __init__(self, rotations: np.ndarray, positions: np.ndarray):
        self.rotations = np.asarray(rotations, dtype=float)
        self.positions = np.asarray(positions, dtype=float)

    def to_map(self, index: int, scan: Scan) -> np.ndarray:
        return quat_rotate(self.rotations[index], scan.points) + self.positions[index]


class TrajectoryPoseSource:
    """Per-point poses from a continuous trajectory."""

    def __init__(self, traj: Trajectory, ext: Extrinsics, t_map: float):
        self.traj = traj
        self.ext = ext
        self.t_map = float(t_map)

    def to_map(self, index: int, scan: Scan) -> np.ndarray:
        return lidar_point_to_map(self.traj, self.ext, scan.points, scan.times, self.t_map)


class SurfelMap:
    """Voxel cells of the accumulated map cloud and their fitted surfels.

    Metadata:
        - Storage: raw first and second moments per cell
        - Lookup: sorted int64 cell keys
        - Determinism: RANSAC seeded per cell
    """

    def __init__(self, cell_size: float):
        if cell_size <= 0.0:
            raise ValueError("cell_size must be positive")
        self.cell_size = float(cell_size)
        self.cells: Dict[CellIndex, VoxelCell] = {}
        self.surfels: Dict[CellIndex, Surfel] = {}
        self.skipped_points = 0
        self._keys = np.zeros(0, dtype=np.int64)
        self._surfel_list: List[Surfel] = []

    def cell_indices(self, points: np.ndarray) -> np.ndarray:
        return np.floor(np.asarray(points, dtype=float) / self.cell_size).astype(np.int64)

    def insert(self, points: np.ndarray, point_ids: Optional[np.ndarray] = None) -> int:
        """Add map-frame points; non-finite points are skipped and counted.

        Returns:
            Number of points inserted
        """
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        if point_ids is None:
            point_ids = np.arange(len(points), dtype=np.int64)
        finite = np.all(np.isfinite(points), axis=1)
        skipped = int(np.count_nonzero(~finite))
        if skipped:
            self.skipped_points += skipped
            logger.warning(f"Skipped {skipped} non-finite points")
        points, point_ids = points[finite], np.asarray(point_ids)[finite]
        if len(points) == 0:
            return 0
        indices = self.cell_indices(points)
        unique, inverse = np.unique(indices, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(len(unique) + 1))
        for k, idx in enumerate(unique):
            members = order[bounds[k]:bounds[k + 1]]
            key = (int(idx[0]), int(idx[1]), int(idx[2]))
            cell = self.cells.get(key)
            if cell is None:
                cell = VoxelCell(index=key)
                self.cells[key] = cell
            cell.add_points(point_ids[members], points[members])
        return len(points)

    def extract_surfels(
        self,
        threshold: float,
        config: Optional[SurfelConfig] = None,
        seed: int = 0,
    ) -> int:
        """Fit surfels to every cell whose plane-likeness reaches ``threshold``.

        Returns:
            Number of surfels
        """
        config = config or SurfelConfig(cell_size=self.cell_size)
        self.surfels = {}
        sparse_cells = 0
        rejected = 0
        for index in sorted(self.cells):
            cell = self.cells[index]
            score = plane_likeness(cell, config.min_points)
            if score is None:
                sparse_cells += 1
                continue
            if score < threshold:
                continue
            surfel = fit_plane_ransac(
                cell,
                inlier_tol=config.ransac_inlier_tol,
                iters=config.ransac_iters,
                rng=cell_rng(seed, index),
                min_inlier_ratio=config.min_inlier_ratio,
                min_points=config.min_points,
            )
            if surfel is None:
                rejected += 1
                continue
            self.surfels[index] = surfel
        self._index_surfels()
        logger.info(
            f"Extracted {len(self.surfels)} surfels from {len(self.cells)} cells "
            f"(threshold {threshold:.2f}, {sparse_cells} sparse, {rejected} rejected by RANSAC)"
        )
        return len(self.surfels)

    def _index_surfels(self) -> None:
        indices = sorted(self.surfels)
        self._surfel_list = [self.surfels[i] for i in indices]
        if indices:
            self._keys = encode_cells(np.array(indices, dtype=np.int64))
        else:
            self._keys = np.zeros(0, dtype=np.int64)

    @property
    def surfel_list(self) -> List[Surfel]:
        """Surfels ordered by cell index; positions match :meth:`lookup` results."""
        return self._surfel_list

    def lookup(self, points: np.ndarray) -> np.ndarray:
        """Index into :attr:`surfel_list` of each point's cell surfel, ``-1`` if none."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        result = np.full(len(points), -1, dtype=np.int64)
        if len(self._keys) == 0 or len(points) == 0:
            return result
        finite = np.all(np.isfinite(points), axis=1)
        keys = encode_cells(self.cell_indices(points[finite]))
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, len(self._keys) - 1)
        hit = self._keys[pos] == keys
        found = np.where(hit, pos, -1)
        result[finite] = found
        return result

    def plane_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Normals ``(S, 3)`` and offsets ``(S,)`` of :attr:`surfel_list`."""
        if not self._surfel_list:
            return np.zeros((0, 3)), np.zeros(0)
        normals = np.array([s.normal for s in self._surfel_list])
        offsets = np.array([s.d for s in self._surfel_list])
        return normals, offsets


def build_map(
    scans: Sequence[Scan],
    poses: PoseSource,
    cell_size: float,
) -> SurfelMap:
    """Accumulate scans into a voxel map.

    Args:
        scans: Scans to insert
        poses: Pose source mapping each scan's points into the map frame
        cell_size: Voxel edge length (m)

    Returns:
        Map with populated cells and no surfels yet
    """
    surfel_map = SurfelMap(cell_size)
    offset = 0
    for k, scan in enumerate(scans):
        if len(scan) == 0:
            continue
        points = poses.to_map(k, scan)
        surfel_map.insert(points, offset + np.arange(len(scan), dtype=np.int64))
        offset += len(scan)
    logger.info(
        f"Built voxel map: {offset} points in {len(surfel_map.cells)} cells "
        f"of {cell_size:.2f} m ({surfel_map.skipped_points} skipped)"
    )
    return surfel_map
