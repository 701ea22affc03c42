"""Configuration models for calibration runs."""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.core.errors import ConfigError

logger = logging.getLogger(__name__)

GRAVITY_MAGNITUDE = 9.81

ModelT = TypeVar("ModelT", bound=BaseModel)


class Profile(str, Enum):
    """Environment profile selecting the voxel resolution."""
    INDOOR = "indoor"
    OUTDOOR = "outdoor"

    @property
    def cell_size(self) -> float:
        """Voxel edge length in meters for this profile."""
        return 0.5 if self is Profile.INDOOR else 1.0


class OdometrySource(str, Enum):
    """LiDAR pose source used before the first optimization."""
    ORACLE = "oracle"
    ICP = "icp"


class NoiseConfig(BaseModel):
    """Isotropic measurement noise used to whiten residuals."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "sigma_accel": 0.02,
                "sigma_gyro": 0.005,
                "sigma_lidar": 0.01
            }
        }
    )

    sigma_accel: float = Field(default=0.02, gt=0.0, description="Accelerometer noise (m/s^2)")
    sigma_gyro: float = Field(default=0.005, gt=0.0, description="Gyroscope noise (rad/s)")
    sigma_lidar: float = Field(default=0.01, gt=0.0, description="Point-to-plane noise (m)")


class SolverOptions(BaseModel):
    """Levenberg-Marquardt settings."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "max_iters": 50,
                "lambda0": 1e-4,
                "lambda_up": 10.0,
                "lambda_down": 10.0,
                "tol": 1e-8,
                "use_huber": False,
                "huber_delta": 0.05,
                "estimate_gravity": True,
                "fd_step": 1e-6
            }
        }
    )

    max_iters: int = Field(default=50, ge=1, description="Maximum LM iterations")
    lambda0: float = Field(default=1e-4, gt=0.0, description="Initial damping")
    lambda_up: float = Field(default=10.0, gt=1.0, description="Damping growth on rejection")
    lambda_down: float = Field(default=10.0, gt=1.0, description="Damping shrink on acceptance")
    tol: float = Field(default=1e-8, gt=0.0, description="Relative cost change for convergence")
    use_huber: bool = Field(default=False, description="Apply a Huber loss to LiDAR residuals")
    huber_delta: float = Field(default=0.05, gt=0.0, description="Huber threshold (m)")
    estimate_gravity: bool = Field(default=True, description="Estimate gravity direction jointly")
    fd_step: float = Field(default=1e-6, gt=0.0, description="Finite-difference step")
    threads: int = Field(default=1, ge=1, description="Workers for Jacobian assembly")


class SurfelConfig(BaseModel):
    """Voxel map, plane extraction and association settings."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "cell_size": 0.5,
                "planarity_first": 0.6,
                "planarity_later": 0.7,
                "reject_dist": 0.05,
                "downsample_ratio": 0.1
            }
        }
    )

    cell_size: float = Field(default=0.5, gt=0.0, description="Voxel edge length (m)")
    planarity_first: float = Field(default=0.6, ge=0.0, le=1.0, description="Plane-likeness threshold, first round")
    planarity_later: float = Field(default=0.7, ge=0.0, le=1.0, description="Plane-likeness threshold, later rounds")
    reject_dist: float = Field(default=0.05, gt=0.0, description="Point-to-plane gating distance (m)")
    min_points: int = Field(default=10, ge=3, description="Minimum cell population")
    ransac_iters: int = Field(default=50, ge=1, description="RANSAC hypotheses per cell")
    ransac_inlier_tol: float = Field(default=0.02, gt=0.0, description="RANSAC inlier distance (m)")
    min_inlier_ratio: float = Field(default=0.5, gt=0.0, le=1.0, description="Minimum RANSAC inlier ratio")
    downsample_ratio: float = Field(default=0.1, gt=0.0, le=1.0, description="Random keep ratio per scan")


class CalibConfig(BaseModel):
    """Top-level configuration of one calibration run."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "knot_dt": 0.02,
                "iterations": 8,
                "odometry_source": "oracle",
                "profile": "indoor",
                "seed": 0
            }
        }
    )

    knot_dt: float = Field(default=0.02, gt=0.0, description="Uniform knot spacing (s)")
    iterations: int = Field(default=8, ge=1, description="Refinement rounds")
    odometry_source: OdometrySource = Field(default=OdometrySource.ORACLE, description="Initial LiDAR pose source")
    profile: Optional[Profile] = Field(default=None, description="Overrides surfel.cell_size when set")
    surfel: SurfelConfig = Field(default_factory=SurfelConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    solver: SolverOptions = Field(default_factory=SolverOptions)
    handeye_threshold: float = Field(default=0.02, gt=0.0, description="Hand-eye outlier threshold (rad)")
    estimate_gyro_bias: bool = Field(default=True, description="Estimate a constant gyro bias during rotation initialization")
    min_angular_velocity: float = Field(default=0.1, ge=0.0, description="Mean |omega| floor (rad/s)")
    min_duration: float = Field(default=2.0, gt=0.0, description="Minimum overlapping data span (s)")
    gravity_init_window: float = Field(default=0.2, gt=0.0, description="Window for gravity initialization (s)")
    early_exit: bool = Field(default=False, description="Stop refinement once the estimate plateaus")
    plateau_trans_tol: float = Field(default=1e-3, gt=0.0, description="Plateau translation change (m)")
    plateau_rot_tol_deg: float = Field(default=0.05, gt=0.0, description="Plateau rotation change (deg)")
    oracle_sigma_rot: float = Field(default=0.0035, ge=0.0, description="Oracle odometry rotation noise (rad)")
    oracle_sigma_trans: float = Field(default=0.01, ge=0.0, description="Oracle odometry translation noise (m)")
    icp_max_iters: int = Field(default=30, ge=1, description="ICP Gauss-Newton iterations per scan")
    icp_max_distance: float = Field(default=0.5, gt=0.0, description="ICP correspondence gate (m)")
    report_timing: bool = Field(default=False, description="Include stage timings in the report")
    seed: int = Field(default=0, ge=0, description="Master random seed")

    @model_validator(mode="after")
    def check_thresholds(self) -> "CalibConfig":
        """Later planarity threshold must not relax the first one."""
        if self.surfel.planarity_later < self.surfel.planarity_first:
            raise ValueError("planarity_later must be >= planarity_first")
        return self

    @property
    def cell_size(self) -> float:
        """Voxel size after applying the profile override."""
        if self.profile is not None:
            return self.profile.cell_size
        return self.surfel.cell_size


def load_config(path: Union[str, Path], model: Type[ModelT] = CalibConfig) -> ModelT:  # type: ignore[assignment]
    """Load and validate a JSON configuration file.

    Args:
        path: JSON file
        model: Pydantic model to validate against

    Returns:
        Validated configuration instance

    Raises:
        ConfigError: If the file cannot be read or fails validation
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Cannot read config {path}: {e}")
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        return model.model_validate_json(text)
    except ValidationError as e:
        logger.error(f"Invalid config {path}: {e}")
        raise ConfigError(f"invalid config {path}: {e}") from e


def dump_config_schema() -> Dict[str, Any]:
    """JSON schemas of every configuration document the toolkit reads."""
    from src.sim.types import SimConfig

    return {
        "CalibConfig": CalibConfig.model_json_schema(),
        "SimConfig": SimConfig.model_json_schema(),
    }


def dump_config(config: BaseModel) -> str:
    """Serialize a configuration with every default spelled out."""
    return json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True)
