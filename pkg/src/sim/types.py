"""
Configuration models of the simulator.
"""

from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.config import GRAVITY_MAGNITUDE
from src.trajectory import Extrinsics

Vector3 = Tuple[float, float, float]


class ImuModel(BaseModel):
    """Simulated IMU."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "rate": 400.0,
                "sigma_gyro": 0.005,
                "sigma_accel": 0.02,
                "bias_g": [0.0, 0.0, 0.0],
                "bias_a": [0.0, 0.0, 0.0]
            }
        }
    )

    rate: float = Field(default=400.0, gt=0.0, description="Sample rate (Hz)")
    sigma_gyro: float = Field(default=0.005, ge=0.0, description="Gyroscope noise (rad/s)")
    sigma_accel: float = Field(default=0.02, ge=0.0, description="Accelerometer noise (m/s^2)")
    bias_g: Vector3 = Field(default=(0.0, 0.0, 0.0), description="Constant gyroscope bias (rad/s)")
    bias_a: Vector3 = Field(default=(0.0, 0.0, 0.0), description="Constant accelerometer bias (m/s^2)")
    gravity: float = Field(
        default=GRAVITY_MAGNITUDE,
        ge=GRAVITY_MAGNITUDE,
        le=GRAVITY_MAGNITUDE,
        description="Gravity magnitude (m/s^2), fixed by the trajectory model",
    )


class LidarModel(BaseModel):
    """Simulated spinning multi-beam LiDAR."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "beams": 16,
                "fov_deg": 15.0,
                "rate": 10.0,
                "azimuth_steps": 360,
                "range_noise": 0.01,
                "max_range": 50.0
            }
        }
    )

    beams: int = Field(default=16, ge=1, description="Number of beams")
    fov_deg: float = Field(default=15.0, gt=0.0, le=15.0, description="Half vertical field of view (deg)")
    rate: float = Field(default=10.0, gt=0.0, description="Revolutions per second")
    azimuth_steps: int = Field(default=360, ge=1, description="Firings per revolution")
    range_noise: float = Field(default=0.01, ge=0.0, description="Range noise (m)")
    max_range: float = Field(default=50.0, gt=0.0, description="Maximum range (m)")
    elevations_deg: Optional[List[float]] = Field(
        default=None, description="Explicit beam elevations (deg), overriding the uniform fan"
    )

    @field_validator("elevations_deg")
    @classmethod
    def check_elevations(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and (not v or any(abs(e) > 15.0 for e in v)):
            raise ValueError("elevations must be non-empty and within +-15 degrees")
        return v

    @property
    def elevations(self) -> np.ndarray:
        """Beam elevations in radians."""
        if self.elevations_deg is not None:
            return np.deg2rad(np.asarray(self.elevations_deg, dtype=float))
        if self.beams == 1:
            return np.zeros(1)
        return np.deg2rad(np.linspace(-self.fov_deg, self.fov_deg, self.beams))

    @property
    def period(self) -> float:
        return 1.0 / self.rate


class SinusoidParams(BaseModel):
    """Per-axis sinusoidal position and orientation of the IMU."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "pos_amplitude": [0.5, 0.5, 0.3],
                "pos_frequency": [0.2, 0.25, 0.3],
                "rot_amplitude": [0.5, 0.5, 0.8],
                "rot_frequency": [0.3, 0.35, 0.25]
            }
        }
    )

    pos_amplitude: Vector3 = Field(default=(0.5, 0.5, 0.3), description="Position amplitude (m)")
    pos_frequency: Vector3 = Field(default=(0.2, 0.25, 0.3), description="Position frequency (Hz)")
    rot_amplitude: Vector3 = Field(default=(0.5, 0.5, 0.8), description="Rotation-vector amplitude (rad)")
    rot_frequency: Vector3 = Field(default=(0.3, 0.35, 0.25), description="Rotation frequency (Hz)")

    @property
    def max_frequency(self) -> float:
        return float(max(max(self.pos_frequency), max(self.rot_frequency)))


class SceneConfig(BaseModel):
    """Corner of two walls and a floor."""
    wall_distance: float = Field(default=4.0, gt=0.0, description="Distance of both walls from the origin (m)")
    floor_height: float = Field(default=-1.5, lt=0.0, description="Floor height (m)")
    extent: float = Field(default=10.0, gt=0.0, description="Edge length of every plane (m)")


class SimConfig(BaseModel):
    """Everything needed to generate one simulated dataset."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "duration": 10.0,
                "knot_dt": 0.02,
                "truth_euler_deg": [10.0, 10.0, 10.0],
                "truth_translation": [0.1, -0.05, 0.15],
                "seed": 0
            }
        }
    )

    duration: float = Field(default=10.0, gt=0.0, description="Sequence length (s)")
    knot_dt: float = Field(default=0.02, gt=0.0, description="Knot spacing of the truth trajectory (s)")
    imu: ImuModel = Field(default_factory=ImuModel)
    lidar: LidarModel = Field(default_factory=LidarModel)
    motion: SinusoidParams = Field(default_factory=SinusoidParams)
    scene: SceneConfig = Field(default_factory=SceneConfig)
    truth_euler_deg: Vector3 = Field(default=(10.0, 10.0, 10.0), description="Truth roll, pitch, yaw (deg)")
    truth_translation: Vector3 = Field(default=(0.1, -0.05, 0.15), description="Truth p_LI (m)")
    seed: int = Field(default=0, ge=0, description="Master random seed")

    @property
    def truth_extrinsics(self) -> Extrinsics:
        return Extrinsics.from_euler(np.asarray(self.truth_euler_deg), np.asarray(self.truth_translation))

    def noiseless(self) -> "SimConfig":
        """Copy with every sensor noise set to zero."""
        return self.model_copy(
            update={
                "imu": self.imu.model_copy(update={"sigma_gyro": 0.0, "sigma_accel": 0.0}),
                "lidar": self.lidar.model_copy(update={"range_noise": 0.0}),
            }
        )
