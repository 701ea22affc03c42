"""
Calibration state and its layout in the parameter vector.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.splines import KnotGrid, SplineR3, SplineSO3
from src.splines.quaternion import quat_exp, quat_multiply, quat_normalize
from src.trajectory import Extrinsics, Trajectory, dof_from_gravity, gravity_from_dof

_AXES = ("x", "y", "z")


@dataclass(frozen=True)
class StateLayout:
    """Column offsets of each state block in the increment vector.

    The first rotation and position control points are the gauge and have
    no columns.

    Attributes:
        n: Number of control points per spline
        estimate_gravity: Whether the two gravity angles are free
    """
    n: int
    estimate_gravity: bool = True

    @property
    def ext_rot(self) -> int:
        return 0

    @property
    def ext_trans(self) -> int:
        return 3

    @property
    def rot(self) -> int:
        return 6

    @property
    def pos(self) -> int:
        return self.rot + 3 * (self.n - 1)

    @property
    def bias_a(self) -> int:
        return self.pos + 3 * (self.n - 1)

    @property
    def bias_g(self) -> int:
        return self.bias_a + 3

    @property
    def gravity(self) -> int:
        return self.bias_g + 3

    @property
    def size(self) -> int:
        return self.gravity + (2 if self.estimate_gravity else 0)

    @property
    def ctrl_columns(self) -> np.ndarray:
        return np.arange(self.rot, self.bias_a)

    @property
    def calib_columns(self) -> np.ndarray:
        """Extrinsic, bias and gravity columns."""
        return np.concatenate([np.arange(0, self.rot), np.arange(self.bias_a, self.size)])

    def labels(self) -> List[str]:
        """Human-readable name of every column."""
        names = [f"ext_rot_{a}" for a in _AXES] + [f"ext_trans_{a}" for a in _AXES]
        names += [f"rot_ctrl[{k}]_{a}" for k in range(1, self.n) for a in _AXES]
        names += [f"pos_ctrl[{k}]_{a}" for k in range(1, self.n) for a in _AXES]
        names += [f"bias_a_{a}" for a in _AXES] + [f"bias_g_{a}" for a in _AXES]
        if self.estimate_gravity:
            names += ["gravity_alpha", "gravity_beta"]
        return names


@dataclass(frozen=True, eq=False)
class CalibState:
    """Everything the optimizer estimates.

    Attributes:
        grid: Knot grid of both splines
        ext: LiDAR-IMU extrinsics
        rot_ctrl: Rotation control points, ``(n, 4)``
        pos_ctrl: Position control points, ``(n, 3)``
        bias_a: Accelerometer bias (m/s^2)
        bias_g: Gyroscope bias (rad/s)
        gravity_dof: Gravity direction angles (rad)
    """
    grid: KnotGrid
    ext: Extrinsics
    rot_ctrl: np.ndarray
    pos_ctrl: np.ndarray
    bias_a: np.ndarray
    bias_g: np.ndarray
    gravity_dof: np.ndarray

    def __post_init__(self) -> None:
        rot = quat_normalize(np.asarray(self.rot_ctrl, dtype=float).reshape(self.grid.n, 4))
        object.__setattr__(self, "rot_ctrl", rot)
        object.__setattr__(self, "pos_ctrl", np.asarray(self.pos_ctrl, dtype=float).reshape(self.grid.n, 3))
        object.__setattr__(self, "bias_a", np.asarray(self.bias_a, dtype=float).reshape(3))
        object.__setattr__(self, "bias_g", np.asarray(self.bias_g, dtype=float).reshape(3))
        object.__setattr__(self, "gravity_dof", np.asarray(self.gravity_dof, dtype=float).reshape(2))

    @classmethod
    def from_trajectory(
        cls,
        traj: Trajectory,
        ext: Extrinsics,
        bias_a: Optional[np.ndarray] = None,
        bias_g: Optional[np.ndarray] = None,
    ) -> "CalibState":
        """Initial state from a trajectory, rebased onto the first-pose gauge."""
        traj = traj.rebased()
        return cls(
            grid=traj.grid,
            ext=ext,
            rot_ctrl=traj.rot.ctrl,
            pos_ctrl=traj.pos.ctrl,
            bias_a=np.zeros(3) if bias_a is None else bias_a,
            bias_g=np.zeros(3) if bias_g is None else bias_g,
            gravity_dof=dof_from_gravity(traj.gravity),
        )

    @property
    def gravity(self) -> np.ndarray:
        return gravity_from_dof(self.gravity_dof)

    def to_trajectory(self) -> Trajectory:
        return Trajectory(
            rot=SplineSO3(self.grid, self.rot_ctrl),
            pos=SplineR3(self.grid, self.pos_ctrl),
            gravity=self.gravity,
        )

    def retract(self, delta: np.ndarray, layout: StateLayout) -> "CalibState":
        """Apply an increment: right-multiplied rotations, additive vectors.

        Args:
            delta: Increment of length ``layout.size``
            layout: Column layout of ``delta``

        Returns:
            Updated state with re-normalized quaternions
        """
        delta = np.asarray(delta, dtype=float)
        n = self.grid.n
        q_LI = quat_multiply(self.ext.rotation, quat_exp(delta[layout.ext_rot:layout.ext_rot + 3]))
        p_LI = self.ext.translation + delta[layout.ext_trans:layout.ext_trans + 3]

        rot = self.rot_ctrl.copy()
        d_rot = delta[layout.rot:layout.pos].reshape(n - 1, 3)
        rot[1:] = quat_multiply(rot[1:], quat_exp(d_rot))
        pos = self.pos_ctrl.copy()
        pos[1:] += delta[layout.pos:layout.bias_a].reshape(n - 1, 3)

        gravity_dof = self.gravity_dof
        if layout.estimate_gravity:
            gravity_dof = gravity_dof + delta[layout.gravity:layout.gravity + 2]

        return CalibState(
            grid=self.grid,
            ext=Extrinsics.from_arrays(q_LI, p_LI),
            rot_ctrl=rot,
            pos_ctrl=pos,
            bias_a=self.bias_a + delta[layout.bias_a:layout.bias_a + 3],
            bias_g=self.bias_g + delta[layout.bias_g:layout.bias_g + 3],
            gravity_dof=gravity_dof,
        )

    def with_extrinsics(self, ext: Extrinsics) -> "CalibState":
        return CalibState(
            grid=self.grid,
            ext=ext,
            rot_ctrl=self.rot_ctrl,
            pos_ctrl=self.pos_ctrl,
            bias_a=self.bias_a,
            bias_g=self.bias_g,
            gravity_dof=self.gravity_dof,
        )
