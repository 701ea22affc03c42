"""
Finite planar scenes and ray casting against them.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .types import SceneConfig


@dataclass(frozen=True, eq=False)
class Plane:
    """Rectangular plane patch ``n . x + d = 0``.

    Attributes:
        normal: Unit normal
        d: Offset
        center: Patch center
        axes: Two orthonormal in-plane directions, ``(2, 3)``
        half_size: Half edge length along each axis (m)
    """
    normal: np.ndarray
    d: float
    center: np.ndarray
    axes: np.ndarray
    half_size: float

    @classmethod
    def through(cls, center: np.ndarray, axes: np.ndarray, half_size: float) -> "Plane":
        center = np.asarray(center, dtype=float)
        axes = np.asarray(axes, dtype=float)
        normal = np.cross(axes[0], axes[1])
        normal = normal / np.linalg.norm(normal)
        return cls(normal=normal, d=-float(normal @ center), center=center, axes=axes, half_size=half_size)

    def intersect(self, origins: np.ndarray, directions: np.ndarray) -> np.ndarray:
        """Ray parameter of the hit inside the patch, ``inf`` for misses."""
        denom = directions @ self.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -(origins @ self.normal + self.d) / denom
        valid = np.isfinite(t) & (t > 0.0) & (np.abs(denom) > 1e-12)
        hits = origins + np.where(valid, t, 0.0)[:, None] * directions
        local = (hits - self.center) @ self.axes.T
        inside = np.all(np.abs(local) <= self.half_size, axis=1)
        return np.where(valid & inside, t, np.inf)


@dataclass(frozen=True, eq=False)
class PlaneScene:
    """Collection of plane patches."""
    planes: List[Plane]

    @classmethod
    def corner(cls, config: Optional[SceneConfig] = None) -> "PlaneScene":
        """Two perpendicular walls and a floor meeting in one corner."""
        config = config or SceneConfig()
        w, f, half = config.wall_distance, config.floor_height, 0.5 * config.extent
        ex, ey, ez = np.eye(3)
        return cls(planes=[
            Plane.through(np.array([w, w - half, f + half]), np.array([ey, ez]), half),
            Plane.through(np.array([w - half, w, f + half]), np.array([ez, ex]), half),
            Plane.through(np.array([w - half, w - half, f]), np.array([ex, ey]), half),
        ])

    def cast(self, origins: np.ndarray, directions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Nearest hit of every ray.

        Returns:
            ``(range, plane index)``; misses have range ``inf`` and index ``-1``
        """
        if not self.planes:
            return np.full(len(origins), np.inf), np.full(len(origins), -1)
        ranges = np.stack([p.intersect(origins, directions) for p in self.planes], axis=1)
        index = np.argmin(ranges, axis=1)
        best = ranges[np.arange(len(origins)), index]
        return best, np.where(np.isfinite(best), index, -1)
