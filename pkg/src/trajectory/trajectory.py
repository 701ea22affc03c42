"""
Continuous IMU trajectory, LiDAR-IMU extrinsics and measurement predictions.

The trajectory lives in the frame of the IMU at the start of the sequence;
the map frame is the LiDAR frame at the map reference time, reached from
the trajectory frame through the extrinsics.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.spatial.transform import Rotation

from src.config import GRAVITY_MAGNITUDE
from src.splines import SplineR3, SplineSO3, KnotGrid
from src.splines.quaternion import (
    quat_conjugate,
    quat_multiply,
    quat_rotate,
    quat_to_matrix,
)

logger = logging.getLogger(__name__)

TimeLike = Union[float, np.ndarray]

GRAVITY_TOLERANCE = 1e-9


def wxyz_to_xyzw(q: np.ndarray) -> np.ndarray:
    return np.roll(np.asarray(q, dtype=float), -1, axis=-1)


def xyzw_to_wxyz(q: np.ndarray) -> np.ndarray:
    return np.roll(np.asarray(q, dtype=float), 1, axis=-1)


class Extrinsics(BaseModel):
    """Rigid LiDAR-to-IMU transform: ``p_I = R(q_LI) p_L + p_LI``."""
    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "q_LI": [1.0, 0.0, 0.0, 0.0],
                "p_LI": [0.1, -0.05, 0.15]
            }
        }
    )

    q_LI: Tuple[float, float, float, float] = Field(
        default=(1.0, 0.0, 0.0, 0.0), description="Rotation LiDAR->IMU, (w, x, y, z)"
    )
    p_LI: Tuple[float, float, float] = Field(
        default=(0.0, 0.0, 0.0), description="LiDAR origin in the IMU frame (m)"
    )

    @field_validator("q_LI")
    @classmethod
    def normalize_rotation(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        """Normalize to unit norm with a non-negative real part."""
        q = np.asarray(v, dtype=float)
        norm = np.linalg.norm(q)
        if not np.isfinite(norm) or norm < 1e-6:
            raise ValueError("q_LI must be a non-zero finite quaternion")
        # already-unit values pass through so JSON round trips are exact
        if abs(norm - 1.0) > 1e-12:
            q = q / norm
        if q[0] < 0.0:
            q = -q
        return tuple(float(x) for x in q)

    @classmethod
    def from_arrays(cls, q: np.ndarray, p: np.ndarray) -> "Extrinsics":
        return cls(q_LI=tuple(np.asarray(q, dtype=float)), p_LI=tuple(np.asarray(p, dtype=float)))

    @classmethod
    def from_euler(cls, angles_deg: np.ndarray, p: np.ndarray) -> "Extrinsics":
        """Build from roll/pitch/yaw degrees (``xyz`` extrinsic convention)."""
        q = xyzw_to_wxyz(Rotation.from_euler("xyz", angles_deg, degrees=True).as_quat())
        return cls.from_arrays(q, p)

    @property
    def rotation(self) -> np.ndarray:
        return np.array(self.q_LI)

    @property
    def translation(self) -> np.ndarray:
        return np.array(self.p_LI)

    @property
    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def euler_deg(self) -> np.ndarray:
        """Roll, pitch, yaw in degrees (``xyz`` extrinsic convention)."""
        return Rotation.from_quat(wxyz_to_xyzw(self.rotation)).as_euler("xyz", degrees=True)


def gravity_from_dof(dof: np.ndarray, magnitude: float = GRAVITY_MAGNITUDE) -> np.ndarray:
    """Gravity vector ``Rx(a) Ry(b) (0, 0, -|g|)``."""
    a, b = float(dof[0]), float(dof[1])
    return magnitude * np.array(
        [-np.sin(b), np.sin(a) * np.cos(b), -np.cos(a) * np.cos(b)]
    )


def gravity_dof_jacobian(dof: np.ndarray, magnitude: float = GRAVITY_MAGNITUDE) -> np.ndarray:
    """Derivative of :func:`gravity_from_dof`, shape ``(3, 2)``."""
    a, b = float(dof[0]), float(dof[1])
    return magnitude * np.array(
        [
            [0.0, -np.cos(b)],
            [np.cos(a) * np.cos(b), -np.sin(a) * np.sin(b)],
            [np.sin(a) * np.cos(b), np.cos(a) * np.sin(b)],
        ]
    )


def dof_from_gravity(g: np.ndarray) -> np.ndarray:
    """Inverse of :func:`gravity_from_dof` for any non-zero direction."""
    d = np.asarray(g, dtype=float) / np.linalg.norm(g)
    b = np.arcsin(np.clip(-d[0], -1.0, 1.0))
    a = np.arctan2(d[1], -d[2])
    return np.array([a, b])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """IMU pose as a function of time plus the gravity vector.

    Attributes:
        rot: Orientation of the IMU frame in the trajectory frame
        pos: IMU origin in the trajectory frame (m)
        gravity: Gravity in the trajectory frame, ``|g| = 9.81`` or exactly zero
    """
    rot: SplineSO3
    pos: SplineR3
    gravity: np.ndarray

    def __post_init__(self) -> None:
        if self.rot.grid != self.pos.grid:
            raise ValueError("rotation and position splines must share a knot grid")
        g = np.array(self.gravity, dtype=float)
        norm = np.linalg.norm(g)
        if norm != 0.0 and abs(norm - GRAVITY_MAGNITUDE) > GRAVITY_TOLERANCE:
            raise ValueError(f"gravity norm {norm} differs from {GRAVITY_MAGNITUDE}")
        g.flags.writeable = False
        object.__setattr__(self, "gravity", g)

    @property
    def grid(self) -> KnotGrid:
        return self.rot.grid

    def pose(self, t: TimeLike) -> Tuple[np.ndarray, np.ndarray]:
        """Orientation quaternion and position at ``t``."""
        return self.rot.orientation(t), self.pos.position(t)

    def predict_accel(self, t: TimeLike) -> np.ndarray:
        q = self.rot.orientation(t)
        return quat_rotate(quat_conjugate(q), self.pos.acceleration(t) - self.gravity)

    def predict_gyro(self, t: TimeLike) -> np.ndarray:
        return self.rot.angular_velocity_body(t)

    def rebased(self) -> "Trajectory":
        """Same motion expressed so that the first control pose is the identity.

        The first rotation control point becomes the identity, the first
        position control point becomes zero and gravity is rotated along.
        """
        q0 = self.rot.ctrl[0]
        p0 = self.pos.ctrl[0]
        q0_inv = quat_conjugate(q0)
        rot_ctrl = quat_multiply(q0_inv[None, :], self.rot.ctrl)
        pos_ctrl = quat_rotate(q0_inv[None, :], self.pos.ctrl - p0)
        gravity = quat_rotate(q0_inv, self.gravity)
        return Trajectory(
            rot=self.rot.with_ctrl(rot_ctrl),
            pos=self.pos.with_ctrl(pos_ctrl),
            gravity=gravity,
        )


def predict_accel(traj: Trajectory, t: TimeLike) -> np.ndarray:
    """Specific force in the IMU frame, ``R(t)^T (p''(t) - g)``."""
    return traj.predict_accel(t)


def predict_gyro(traj: Trajectory, t: TimeLike) -> np.ndarray:
    """Body angular velocity of the IMU."""
    return traj.predict_gyro(t)


def transform_to_map(
    q_j: np.ndarray,
    p_j: np.ndarray,
    q_0: np.ndarray,
    p_0: np.ndarray,
    q_LI: np.ndarray,
    p_LI: np.ndarray,
    points: np.ndarray,
) -> np.ndarray:
    """Chain ``L_j -> I_j -> trajectory frame -> I_0 -> L_0`` on point arrays.

    ``q_j``/``p_j`` may be per-point arrays; ``q_0``/``p_0`` are the pose
    at the map reference time.
    """
    p_imu = quat_rotate(q_LI, points) + p_LI
    p_world = quat_rotate(q_j, p_imu) + p_j
    p_ref = quat_rotate(quat_conjugate(q_0), p_world - p_0)
    return quat_rotate(quat_conjugate(q_LI), p_ref - p_LI)


def lidar_point_to_map(
    traj: Trajectory,
    ext: Extrinsics,
    p: np.ndarray,
    t_j: TimeLike,
    t_0: float,
) -> np.ndarray:
    """Express LiDAR points captured at ``t_j`` in the LiDAR frame at ``t_0``.

    Args:
        traj: IMU trajectory
        ext: LiDAR-IMU extrinsics
        p: Point(s) in the LiDAR frame at capture time, ``(3,)`` or ``(N, 3)``
        t_j: Capture time(s)
        t_0: Map reference time

    Returns:
        Point(s) in the map frame with the same shape as ``p``
    """
    q_j, p_j = traj.pose(t_j)
    q_0, p_0 = traj.pose(float(t_0))
    return transform_to_map(
        q_j, p_j, q_0, p_0, ext.rotation, ext.translation, np.asarray(p, dtype=float)
    )
