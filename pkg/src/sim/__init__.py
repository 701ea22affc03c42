"""
Simulation of a LiDAR-IMU rig moving in a planar corner.

Provides the sinusoidal ground-truth trajectory, noisy IMU and
motion-distorted LiDAR measurements, and a Monte Carlo harness that runs
the full calibration on independently seeded sequences.
"""

from .montecarlo import (
    MonteCarloStats,
    SimDataset,
    TrialIteration,
    TrialResult,
    derive_seed,
    generate_dataset,
    monte_carlo,
    run_monte_carlo,
    run_trial,
    summarize,
)
from .scene import Plane, PlaneScene
from .simulate import (
    firing_times,
    make_sinusoid_trajectory,
    simulate_imu,
    simulate_scan,
    sinusoid_fit_residual,
    sinusoid_pose,
)
from .types import ImuModel, LidarModel, SceneConfig, SimConfig, SinusoidParams

__all__ = [
    "ImuModel",
    "LidarModel",
    "MonteCarloStats",
    "Plane",
    "PlaneScene",
    "SceneConfig",
    "SimConfig",
    "SimDataset",
    "SinusoidParams",
    "TrialIteration",
    "TrialResult",
    "derive_seed",
    "firing_times",
    "generate_dataset",
    "make_sinusoid_trajectory",
    "monte_carlo",
    "run_monte_carlo",
    "run_trial",
    "simulate_imu",
    "simulate_scan",
    "sinusoid_fit_residual",
    "sinusoid_pose",
]
