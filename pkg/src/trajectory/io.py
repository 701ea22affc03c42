"""JSON records for trajectories."""

from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.splines import KnotGrid, SplineR3, SplineSO3

from .trajectory import Trajectory


class TrajectoryRecord(BaseModel):
    """Serializable knot grid, control points and gravity."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "grid": {"t0": 0.0, "dt": 0.02, "n": 4},
                "rot_ctrl": [[1.0, 0.0, 0.0, 0.0]] * 4,
                "pos_ctrl": [[0.0, 0.0, 0.0]] * 4,
                "gravity": [0.0, 0.0, -9.81]
            }
        }
    )

    grid: KnotGrid
    rot_ctrl: List[List[float]] = Field(..., description="Unit quaternions (w, x, y, z)")
    pos_ctrl: List[List[float]] = Field(..., description="Positions (m)")
    gravity: List[float] = Field(..., min_length=3, max_length=3)

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "TrajectoryRecord":
        return cls(
            grid=traj.grid,
            rot_ctrl=traj.rot.ctrl.tolist(),
            pos_ctrl=traj.pos.ctrl.tolist(),
            gravity=traj.gravity.tolist(),
        )

    def to_trajectory(self) -> Trajectory:
        return Trajectory(
            rot=SplineSO3(self.grid, np.array(self.rot_ctrl)),
            pos=SplineR3(self.grid, np.array(self.pos_ctrl)),
            gravity=np.array(self.gravity),
        )
