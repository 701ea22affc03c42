"""
Least-squares calibration problem: IMU residuals and point-to-surfel
residuals with isotropic whitening.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.config import NoiseConfig
from src.rot_init.types import ImuSample, stack_imu
from src.splines import KnotGrid
from src.surfel_map import Correspondence, CorrespondenceSet
from src.trajectory import Trajectory, lidar_point_to_map

from .state import CalibState

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Measurements:
    """Array form of the IMU samples and correspondences of a problem."""
    imu_t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray
    points: np.ndarray
    times: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray

    @property
    def n_imu(self) -> int:
        return len(self.imu_t)

    @property
    def n_lidar(self) -> int:
        return len(self.times)

    @property
    def n_rows(self) -> int:
        return 6 * self.n_imu + self.n_lidar

    def split(self, parts: int) -> List["Measurements"]:
        """Contiguous chunks, in order, for parallel assembly."""
        parts = max(1, parts)
        imu = np.array_split(np.arange(self.n_imu), parts)
        lidar = np.array_split(np.arange(self.n_lidar), parts)
        return [
            Measurements(
                imu_t=self.imu_t[a],
                gyro=self.gyro[a],
                accel=self.accel[a],
                points=self.points[b],
                times=self.times[b],
                normals=self.normals[b],
                offsets=self.offsets[b],
            )
            for a, b in zip(imu, lidar)
        ]


def huber_loss(r: np.ndarray, delta: float) -> np.ndarray:
    """``r^2`` inside ``delta``, linear growth ``2 delta |r| - delta^2`` outside."""
    a = np.abs(r)
    return np.where(a <= delta, r * r, 2.0 * delta * a - delta * delta)


def huber_weights(r: np.ndarray, delta: float) -> np.ndarray:
    """Iteratively reweighted least-squares weights of :func:`huber_loss`."""
    a = np.abs(r)
    return np.where(a <= delta, 1.0, delta / np.maximum(a, 1e-300))


def accel_residuals(
    traj: Trajectory, bias_a: np.ndarray, t: np.ndarray, accel: np.ndarray
) -> np.ndarray:
    """``a_m - a(t) - b_a`` for arrays of samples."""
    if len(t) == 0:
        return np.zeros((0, 3))
    return accel - traj.predict_accel(t) - bias_a


def gyro_residuals(
    traj: Trajectory, bias_g: np.ndarray, t: np.ndarray, gyro: np.ndarray
) -> np.ndarray:
    """``w_m - w(t) - b_g`` for arrays of samples."""
    if len(t) == 0:
        return np.zeros((0, 3))
    return gyro - traj.predict_gyro(t) - bias_g


def lidar_residuals(
    state: CalibState,
    traj: Trajectory,
    meas: Measurements,
    t_map: float,
) -> np.ndarray:
    """Signed point-to-plane distances of every correspondence."""
    if meas.n_lidar == 0:
        return np.zeros(0)
    mapped = lidar_point_to_map(traj, state.ext, meas.points, meas.times, t_map)
    return np.einsum("ij,ij->i", mapped, meas.normals) + meas.offsets


def residual_accel(state: CalibState, sample: ImuSample) -> np.ndarray:
    """Accelerometer residual of one sample under ``state``."""
    traj = state.to_trajectory()
    return sample.accel - traj.predict_accel(sample.t) - state.bias_a


def residual_gyro(state: CalibState, sample: ImuSample) -> np.ndarray:
    """Gyroscope residual of one sample under ``state``."""
    traj = state.to_trajectory()
    return sample.gyro - traj.predict_gyro(sample.t) - state.bias_g


def residual_lidar(state: CalibState, corr: Correspondence) -> float:
    """Point-to-plane distance of one correspondence under ``state``."""
    traj = state.to_trajectory()
    mapped = lidar_point_to_map(traj, state.ext, corr.point.p, corr.point.t, corr.t_map)
    return float(np.dot(mapped, corr.surfel.normal) + corr.surfel.d)


@dataclass(eq=False)
class Problem:
    """Measurements, noise model and grid of one optimization.

    Attributes:
        imu_samples: Raw IMU samples inside the grid domain
        correspondences: Point-to-surfel pairs
        noise: Whitening sigmas
        grid: Knot grid of the estimated splines
        t_map: Map reference time, defaults to the correspondences'
        huber_delta: Huber threshold on LiDAR residuals (m), ``None`` for squared loss
    """
    imu_samples: Sequence[ImuSample]
    correspondences: CorrespondenceSet
    noise: NoiseConfig
    grid: KnotGrid
    t_map: Optional[float] = None
    huber_delta: Optional[float] = None
    measurements: Measurements = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.imu_samples:
            imu_t, gyro, accel = stack_imu(self.imu_samples)
        else:
            imu_t, gyro, accel = np.zeros(0), np.zeros((0, 3)), np.zeros((0, 3))
        corr = self.correspondences
        if self.t_map is None:
            self.t_map = corr.t_map
        self.measurements = Measurements(
            imu_t=imu_t,
            gyro=gyro,
            accel=accel,
            points=corr.points,
            times=corr.times,
            normals=corr.normals,
            offsets=corr.offsets,
        )
        # locate raises DomainError on the first out-of-domain timestamp
        self.grid.locate(np.concatenate([imu_t, corr.times, [self.t_map]]))
        logger.debug(
            f"Problem with {len(imu_t)} IMU samples and {len(corr)} correspondences "
            f"on {self.grid.n} control points"
        )

    @property
    def map_time(self) -> float:
        return float(self.t_map)  # type: ignore[arg-type]

    def residuals(self, state: CalibState) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Raw accelerometer, gyroscope and LiDAR residuals."""
        traj = state.to_trajectory()
        m = self.measurements
        return (
            accel_residuals(traj, state.bias_a, m.imu_t, m.accel),
            gyro_residuals(traj, state.bias_g, m.imu_t, m.gyro),
            lidar_residuals(state, traj, m, self.map_time),
        )

    def cost(self, state: CalibState) -> float:
        """Half the sum of whitened squared residuals, Huber-robustified for LiDAR terms."""
        ra, rg, rl = self.residuals(state)
        return self.cost_from_residuals(ra, rg, rl)

    def cost_from_residuals(self, ra: np.ndarray, rg: np.ndarray, rl: np.ndarray) -> float:
        noise = self.noise
        lidar = huber_loss(rl, self.huber_delta) if self.huber_delta is not None else rl * rl
        total = (
            float(np.sum(ra * ra)) / noise.sigma_accel**2
            + float(np.sum(rg * rg)) / noise.sigma_gyro**2
            + float(np.sum(lidar)) / noise.sigma_lidar**2
        )
        return 0.5 * total
