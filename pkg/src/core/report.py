"""Calibration report models."""

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.config import CalibConfig
from src.optimizer import ConvergenceReport
from src.trajectory import Extrinsics

from .metrics import ExcitationStats, ExtrinsicError, ImuResidualStats, TrajectoryError


class IterationRecord(BaseModel):
    """State of the estimate after one optimization round.

    Metadata:
        - Round 1 uses odometry poses for the surfel map
        - Later rounds rebuild the map from the optimized trajectory
    """
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "iteration": 1,
                "q_LI": [0.98, 0.1, 0.1, 0.1],
                "p_LI": [0.1, -0.05, 0.15],
                "euler_deg": [10.0, 10.0, 10.0],
                "initial_cost": 1e5,
                "final_cost": 2e3,
                "correspondences": 20000,
                "surfels": 150,
                "planarity_threshold": 0.6
            }
        }
    )

    iteration: int = Field(..., ge=1, description="Round number")
    q_LI: List[float] = Field(..., description="Extrinsic rotation (w, x, y, z)")
    p_LI: List[float] = Field(..., description="Extrinsic translation (m)")
    euler_deg: List[float] = Field(..., description="Roll, pitch, yaw (deg)")
    initial_cost: float = Field(..., description="Cost before optimization")
    final_cost: float = Field(..., description="Cost after optimization")
    cost_curve: List[float] = Field(default_factory=list, description="Cost after each accepted LM step")
    correspondences: int = Field(..., ge=0, description="Point-to-surfel pairs used")
    surfels: int = Field(..., ge=0, description="Surfels in the map")
    planarity_threshold: float = Field(..., description="Plane-likeness threshold of the map")
    imu_residuals: ImuResidualStats = Field(default_factory=ImuResidualStats)
    error: Optional[ExtrinsicError] = Field(default=None, description="Error against ground truth")
    convergence: ConvergenceReport = Field(default_factory=ConvergenceReport)


class CalibReport(BaseModel):
    """Result of a full calibration run."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "extrinsics": {"q_LI": [0.98, 0.1, 0.1, 0.1], "p_LI": [0.1, -0.05, 0.15]},
                "euler_deg": [10.0, 10.0, 10.0],
                "bias_a": [0.0, 0.0, 0.0],
                "bias_g": [0.0, 0.0, 0.0],
                "gravity": [0.0, 0.0, -9.81],
                "iterations": []
            }
        }
    )

    extrinsics: Extrinsics = Field(..., description="Final estimate")
    euler_deg: List[float] = Field(..., description="Final roll, pitch, yaw (deg)")
    initial_rotation: List[float] = Field(..., description="Hand-eye extrinsic rotation (w, x, y, z)")
    bias_a: List[float] = Field(..., description="Accelerometer bias (m/s^2)")
    bias_g: List[float] = Field(..., description="Gyroscope bias (rad/s)")
    gravity: List[float] = Field(..., description="Gravity in the trajectory frame (m/s^2)")
    iterations: List[IterationRecord] = Field(default_factory=list)
    excitation: ExcitationStats = Field(default_factory=ExcitationStats)
    error: Optional[ExtrinsicError] = Field(default=None, description="Final error against ground truth")
    trajectory_error: Optional[TrajectoryError] = Field(default=None, description="ATE against ground truth")
    config: CalibConfig = Field(default_factory=CalibConfig)
    timing: Optional[Dict[str, float]] = Field(default=None, description="Seconds per stage")

    def extrinsic_history(self) -> List[Extrinsics]:
        return [Extrinsics(q_LI=tuple(r.q_LI), p_LI=tuple(r.p_LI)) for r in self.iterations]
