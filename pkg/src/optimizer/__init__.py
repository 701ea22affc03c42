"""
Continuous-time batch optimizer.

Jointly refines the extrinsics, both trajectory splines, the IMU biases
and the gravity direction by Levenberg-Marquardt over whitened IMU and
point-to-surfel residuals.
"""

from src.config import NoiseConfig, SolverOptions

from .jacobian import NormalEquations, build_jacobian, build_normal_equations
from .problem import (
    Measurements,
    Problem,
    huber_loss,
    huber_weights,
    residual_accel,
    residual_gyro,
    residual_lidar,
)
from .solver import ConvergenceReport, LmIteration, check_observability, solve_lm
from .state import CalibState, StateLayout

__all__ = [
    "CalibState",
    "ConvergenceReport",
    "LmIteration",
    "Measurements",
    "NoiseConfig",
    "NormalEquations",
    "Problem",
    "SolverOptions",
    "StateLayout",
    "build_jacobian",
    "build_normal_equations",
    "check_observability",
    "huber_loss",
    "huber_weights",
    "residual_accel",
    "residual_gyro",
    "residual_lidar",
    "solve_lm",
]
