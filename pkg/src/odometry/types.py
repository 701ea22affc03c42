"""
Type definitions for LiDAR odometry.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.splines.quaternion import (
    quat_conjugate,
    quat_multiply,
    quat_normalize,
    quat_rotate,
)


@dataclass(frozen=True, eq=False)
class ScanPose:
    """Pose of one scan's LiDAR frame in the map frame.

    Attributes:
        t: Scan reference time (s)
        q: Orientation of the scan frame in the map frame, ``(w, x, y, z)``
        p: Scan origin in the map frame (m)
        fitness: Mean absolute registration residual (m), when registered
    """
    t: float
    q: np.ndarray
    p: np.ndarray
    fitness: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "q", quat_normalize(np.asarray(self.q, dtype=float)))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(3))

    def as_tuple(self) -> Tuple[float, np.ndarray, np.ndarray]:
        return self.t, self.q, self.p

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map points from the scan frame into the map frame."""
        return quat_rotate(self.q, points) + self.p


def relative_pose(a: ScanPose, b: ScanPose) -> Tuple[np.ndarray, np.ndarray]:
    """Pose of ``b`` expressed in the frame of ``a``.

    Returns:
        ``(q_a^-1 ⊗ q_b, R(q_a)^T (p_b - p_a))``
    """
    q_inv = quat_conjugate(a.q)
    return quat_multiply(q_inv, b.q), quat_rotate(q_inv, b.p - a.p)


def compose_pose(a: ScanPose, q_rel: np.ndarray, p_rel: np.ndarray, t: float) -> ScanPose:
    """Apply a relative pose to ``a``."""
    return ScanPose(t=t, q=quat_multiply(a.q, q_rel), p=a.p + quat_rotate(a.q, p_rel))
