"""
Test configuration and fixtures for licalib.

This module provides seeded random generators, random spline factories,
the default planar scene and a short noiseless simulated dataset shared
across the test suite.
"""

from typing import Callable, Optional

import numpy as np
import pytest

from src.splines import KnotGrid, SplineR3, SplineSO3, quat_exp, quat_multiply
from src.trajectory import Extrinsics, Trajectory
from src.sim import PlaneScene, SimConfig, SimDataset, generate_dataset


@pytest.fixture
def rng() -> np.random.Generator:
    """Provide a seeded random generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def make_r3_spline(rng) -> Callable[..., SplineR3]:
    """Factory for random position splines."""

    def factory(n: int = 10, dt: float = 0.1, t0: float = 0.0, scale: float = 1.0) -> SplineR3:
        grid = KnotGrid(t0=t0, dt=dt, n=n)
        return SplineR3(grid, scale * rng.normal(size=(n, 3)))

    return factory


@pytest.fixture
def make_so3_spline(rng) -> Callable[..., SplineSO3]:
    """Factory for random rotation splines with bounded steps between control points."""

    def factory(n: int = 10, dt: float = 0.1, t0: float = 0.0, step: float = 0.3) -> SplineSO3:
        grid = KnotGrid(t0=t0, dt=dt, n=n)
        increments = rng.uniform(-step, step, size=(n, 3))
        increments[0] = rng.uniform(-np.pi / 2, np.pi / 2, size=3)
        ctrl = [quat_exp(increments[0])]
        for v in increments[1:]:
            ctrl.append(quat_multiply(ctrl[-1], quat_exp(v)))
        return SplineSO3(grid, np.array(ctrl))

    return factory


@pytest.fixture
def make_trajectory(make_r3_spline, make_so3_spline) -> Callable[..., Trajectory]:
    """Factory for random trajectories sharing one grid."""

    def factory(
        n: int = 12,
        dt: float = 0.1,
        gravity: Optional[np.ndarray] = None,
        step: float = 0.3,
        scale: float = 0.5,
    ) -> Trajectory:
        g = np.array([0.0, 0.0, -9.81]) if gravity is None else gravity
        return Trajectory(
            rot=make_so3_spline(n=n, dt=dt, step=step),
            pos=make_r3_spline(n=n, dt=dt, scale=scale),
            gravity=g,
        )

    return factory


@pytest.fixture
def truth_extrinsics() -> Extrinsics:
    """Non-trivial LiDAR-to-IMU transform."""
    return Extrinsics.from_euler(np.array([10.0, 10.0, 10.0]), np.array([0.1, -0.05, 0.15]))


@pytest.fixture
def corner_scene() -> PlaneScene:
    """Two walls and a floor meeting in a corner."""
    return PlaneScene.corner()


@pytest.fixture(scope="session")
def short_sim_config() -> SimConfig:
    """Three seconds of noiseless data."""
    return SimConfig(duration=3.0, seed=7).noiseless()


@pytest.fixture(scope="session")
def short_dataset(short_sim_config) -> SimDataset:
    """Simulated once per session; tests must not mutate it."""
    return generate_dataset(short_sim_config)
