"""
Type definitions for LiDAR data and surfel maps.

This module defines the timestamped point, the scan container, voxel cells
with incrementally accumulated moments, and the surfels fitted to them.
"""

from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

import numpy as np

CellIndex = Tuple[int, int, int]


@dataclass(frozen=True, eq=False)
class LidarPoint:
    """A single return in the LiDAR frame at its capture time.

    Attributes:
        t: Capture time (s)
        p: Coordinates (m) in the LiDAR frame at ``t``
    """
    t: float
    p: np.ndarray


@dataclass(frozen=True, eq=False)
class Scan:
    """One LiDAR revolution as parallel arrays.

    Attributes:
        t_ref: Scan reference time, the capture time of its first point
        times: Per-point capture times, shape ``(N,)``
        points: Per-point coordinates in the LiDAR frame at capture, ``(N, 3)``
    """
    t_ref: float
    times: np.ndarray
    points: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float).reshape(-1)
        points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if len(times) != len(points):
            raise ValueError(f"{len(times)} timestamps for {len(points)} points")
        object.__setattr__(self, "t_ref", float(self.t_ref))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self) -> Iterator[LidarPoint]:
        for t, p in zip(self.times, self.points):
            yield LidarPoint(float(t), p)

    @property
    def t_end(self) -> float:
        return float(self.times[-1]) if len(self.times) else self.t_ref

    def subset(self, mask: np.ndarray) -> "Scan":
        return Scan(self.t_ref, self.times[mask], self.points[mask])

    def with_points(self, points: np.ndarray) -> "Scan":
        return Scan(self.t_ref, self.times, points)


@dataclass(eq=False)
class VoxelCell:
    """Points falling into one voxel with running moments.

    ``mean`` and ``second_moment`` are the raw moments ``E[x]`` and
    ``E[x x^T]``; the covariance is derived from them.
    """
    index: CellIndex
    count: int = 0
    mean: np.ndarray = field(default_factory=lambda: np.zeros(3))
    second_moment: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    _ids: List[np.ndarray] = field(default_factory=list, repr=False)
    _positions: List[np.ndarray] = field(default_factory=list, repr=False)

    def add_point(self, point_id: int, position: np.ndarray) -> None:
        """Accumulate one point."""
        x = np.asarray(position, dtype=float)
        self.count += 1
        self.mean = self.mean + (x - self.mean) / self.count
        self.second_moment = self.second_moment + (np.outer(x, x) - self.second_moment) / self.count
        self._ids.append(np.array([point_id], dtype=np.int64))
        self._positions.append(x[None, :])

    def add_points(self, point_ids: np.ndarray, positions: np.ndarray) -> None:
        """Accumulate a batch by merging its moments with the running ones."""
        x = np.asarray(positions, dtype=float).reshape(-1, 3)
        m = len(x)
        if m == 0:
            return
        total = self.count + m
        batch_mean = x.mean(axis=0)
        batch_second = x.T @ x / m
        self.mean = (self.count * self.mean + m * batch_mean) / total
        self.second_moment = (self.count * self.second_moment + m * batch_second) / total
        self.count = total
        self._ids.append(np.asarray(point_ids, dtype=np.int64).reshape(-1))
        self._positions.append(x)

    @property
    def positions(self) -> np.ndarray:
        if not self._positions:
            return np.zeros((0, 3))
        if len(self._positions) > 1:
            self._positions = [np.concatenate(self._positions)]
        return self._positions[0]

    @property
    def point_ids(self) -> np.ndarray:
        if not self._ids:
            return np.zeros(0, dtype=np.int64)
        if len(self._ids) > 1:
            self._ids = [np.concatenate(self._ids)]
        return self._ids[0]

    @property
    def points(self) -> List[Tuple[int, np.ndarray]]:
        """Member points as ``(point id, map-frame position)`` pairs."""
        return list(zip(self.point_ids.tolist(), self.positions))

    @property
    def covariance(self) -> np.ndarray:
        cov = self.second_moment - np.outer(self.mean, self.mean)
        return 0.5 * (cov + cov.T)


@dataclass(frozen=True, eq=False)
class Surfel:
    """Plane fitted to one voxel cell, ``n . x + d = 0`` with ``d >= 0``.

    Attributes:
        normal: Unit normal
        d: Offset from the origin (m)
        planarity: Plane-likeness of the cell
        cell: The cell the plane was fitted to
    """
    normal: np.ndarray
    d: float
    planarity: float
    cell: Optional[VoxelCell] = None

    @property
    def plane(self) -> np.ndarray:
        """Homogeneous plane ``[n, d]``."""
        return np.append(self.normal, self.d)

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Signed point-to-plane distance."""
        return np.asarray(points, dtype=float) @ self.normal + self.d
