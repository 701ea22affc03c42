"""
Point-to-surfel data association and random scan downsampling.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import numpy as np

from .types import LidarPoint, Scan, Surfel
from .voxel_map import SurfelMap

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Correspondence:
    """One LiDAR point paired with the surfel it lies on.

    Attributes:
        point: Point in the LiDAR frame at its capture time
        surfel: Associated plane
        map_point: Map-frame position used at association time
        t_map: Reference time of the map frame
    """
    point: LidarPoint
    surfel: Surfel
    map_point: np.ndarray
    t_map: float = 0.0

    @property
    def distance(self) -> float:
        return float(self.surfel.distance(self.map_point))


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """Array view of many correspondences, indexable as a sequence.

    Attributes:
        points: LiDAR-frame coordinates, ``(N, 3)``
        times: Capture times, ``(N,)``
        map_points: Map-frame positions at association time, ``(N, 3)``
        surfel_index: Index of each point's surfel in ``surfels``
        surfels: Surfels referenced by ``surfel_index``
        t_map: Map reference time
    """
    points: np.ndarray
    times: np.ndarray
    map_points: np.ndarray
    surfel_index: np.ndarray
    surfels: List[Surfel]
    t_map: float = 0.0

    def __len__(self) -> int:
        return len(self.times)

    def __getitem__(self, k: int) -> Correspondence:
        return Correspondence(
            point=LidarPoint(float(self.times[k]), self.points[k]),
            surfel=self.surfels[int(self.surfel_index[k])],
            map_point=self.map_points[k],
            t_map=self.t_map,
        )

    def __iter__(self) -> Iterator[Correspondence]:
        for k in range(len(self)):
            yield self[k]

    @property
    def normals(self) -> np.ndarray:
        if not self.surfels:
            return np.zeros((0, 3))
        return np.array([s.normal for s in self.surfels])[self.surfel_index]

    @property
    def offsets(self) -> np.ndarray:
        if not self.surfels:
            return np.zeros(0)
        return np.array([s.d for s in self.surfels])[self.surfel_index]

    @classmethod
    def empty(cls, t_map: float = 0.0) -> "CorrespondenceSet":
        return cls(
            points=np.zeros((0, 3)),
            times=np.zeros(0),
            map_points=np.zeros((0, 3)),
            surfel_index=np.zeros(0, dtype=np.int64),
            surfels=[],
            t_map=t_map,
        )

    @classmethod
    def concatenate(cls, parts: Sequence["CorrespondenceSet"]) -> "CorrespondenceSet":
        """Join sets built against the same map."""
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        return cls(
            points=np.concatenate([p.points for p in parts]),
            times=np.concatenate([p.times for p in parts]),
            map_points=np.concatenate([p.map_points for p in parts]),
            surfel_index=np.concatenate([p.surfel_index for p in parts]),
            surfels=parts[0].surfels,
            t_map=parts[0].t_map,
        )


def associate(
    map_points: np.ndarray,
    surfel_map: SurfelMap,
    reject_dist: float,
    raw_points: Optional[np.ndarray] = None,
    times: Optional[np.ndarray] = None,
    t_map: float = 0.0,
) -> CorrespondenceSet:
    """Pair map-frame points with the surfel of their cell.

    Args:
        map_points: Points in the map frame, ``(N, 3)``
        surfel_map: Map with extracted surfels
        reject_dist: Maximum absolute point-to-plane distance (m)
        raw_points: LiDAR-frame coordinates of the same points, defaults to ``map_points``
        times: Capture times, defaults to zeros
        t_map: Map reference time

    Returns:
        Correspondences of every point whose cell has a surfel within ``reject_dist``
    """
    map_points = np.asarray(map_points, dtype=float).reshape(-1, 3)
    raw_points = map_points if raw_points is None else np.asarray(raw_points, dtype=float)
    times = np.zeros(len(map_points)) if times is None else np.asarray(times, dtype=float)
    slot = surfel_map.lookup(map_points)
    normals, offsets = surfel_map.plane_arrays()
    has = slot >= 0
    distance = np.full(len(map_points), np.inf)
    if np.any(has):
        distance[has] = np.einsum("ij,ij->i", map_points[has], normals[slot[has]]) + offsets[slot[has]]
    keep = np.abs(distance) <= reject_dist
    logger.debug(
        f"Associated {int(keep.sum())} of {len(map_points)} points "
        f"({int(has.sum())} in surfel cells)"
    )
    return CorrespondenceSet(
        points=raw_points[keep],
        times=times[keep],
        map_points=map_points[keep],
        surfel_index=slot[keep],
        surfels=surfel_map.surfel_list,
        t_map=t_map,
    )


def downsample(scan: Scan, keep_ratio: float, seed: int) -> Scan:
    """Keep each point independently with probability ``keep_ratio``.

    Raises:
        ValueError: If ``keep_ratio`` is not in ``(0, 1]``
    """
    if not 0.0 < keep_ratio <= 1.0:
        raise ValueError(f"keep_ratio must be in (0, 1], got {keep_ratio}")
    if keep_ratio == 1.0:
        return scan
    rng = np.random.default_rng(seed)
    return scan.subset(rng.random(len(scan)) < keep_ratio)
