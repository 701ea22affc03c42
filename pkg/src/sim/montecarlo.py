"""
Simulated datasets and the Monte Carlo calibration harness.
"""

import asyncio
import logging
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.config import CalibConfig
from src.core.coordinator import GroundTruth, calibrate
from src.core.errors import CalibrationError, StageError
from src.core.metrics import AxisStats, ExtrinsicError, RepeatabilityStats, repeatability
from src.core.report import CalibReport
from src.rot_init import ImuSample
from src.surfel_map import Scan
from src.trajectory import Extrinsics

from .scene import PlaneScene
from .simulate import make_sinusoid_trajectory, simulate_imu, simulate_scan
from .types import SimConfig

logger = logging.getLogger(__name__)

IMU_STREAM = 0
SCAN_STREAM = 1


def derive_seed(*keys: int) -> int:
    """Independent 32-bit seed for a tuple of integer keys."""
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class SimDataset:
    """Simulated measurements with their ground truth."""
    imu: List[ImuSample]
    scans: List[Scan]
    truth: GroundTruth
    config: SimConfig


def generate_dataset(config: Optional[SimConfig] = None, seed: Optional[int] = None) -> SimDataset:
    """Simulate one calibration sequence.

    Args:
        config: Simulation settings
        seed: Overrides ``config.seed``

    Returns:
        IMU samples, one scan per LiDAR revolution and the ground truth
    """
    config = config or SimConfig()
    seed = config.seed if seed is None else seed
    traj = make_sinusoid_trajectory(config.motion, config.duration, config.knot_dt)
    ext = config.truth_extrinsics
    scene = PlaneScene.corner(config.scene)

    imu = simulate_imu(traj, config.imu, derive_seed(seed, IMU_STREAM))
    n_scans = int(np.floor(config.duration * config.lidar.rate + 1e-9))
    scans = []
    for k in range(n_scans):
        scan_start = traj.grid.t0 + k * config.lidar.period
        scans.append(
            simulate_scan(traj, ext, scene, config.lidar, scan_start, derive_seed(seed, SCAN_STREAM, k))
        )
    empty = sum(1 for s in scans if len(s) == 0)
    if empty:
        logger.warning(f"{empty} of {n_scans} simulated scans hit no plane")
    logger.info(
        f"Simulated {len(imu)} IMU samples and {n_scans} scans "
        f"({sum(len(s) for s in scans)} points) with seed {seed}"
    )
    return SimDataset(
        imu=imu,
        scans=scans,
        truth=GroundTruth(trajectory=traj, extrinsics=ext),
        config=config,
    )


class TrialIteration(BaseModel):
    """Estimate, error and cost after one refinement round of a trial."""
    iteration: int
    rot_err_deg: float
    trans_err_m: float
    cost: float
    correspondences: int
    extrinsics: Optional[Extrinsics] = None


class TrialResult(BaseModel):
    """Outcome of one Monte Carlo trial."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "trial": 0,
                "seed": 2968811710,
                "error": {"rot_deg": 0.02, "trans_m": 0.004},
                "failure": None
            }
        }
    )

    trial: int = Field(..., ge=0)
    seed: int = Field(..., description="Seed of the simulated sequence and calibration")
    extrinsics: Optional[Extrinsics] = None
    error: Optional[ExtrinsicError] = None
    iterations: List[TrialIteration] = Field(default_factory=list)
    failure: Optional[str] = Field(default=None, description="Error message of a failed trial")
    stage: Optional[str] = Field(default=None, description="Pipeline stage that failed")

    @property
    def succeeded(self) -> bool:
        return self.failure is None


class MonteCarloStats(BaseModel):
    """Aggregate extrinsic errors over all successful trials.

    Metadata:
        - ``std`` fields are ``None`` with fewer than two successful trials
        - Error statistics are ``None`` when every trial failed
    """
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "n_trials": 10,
                "n_failed": 0,
                "rot_err_deg": {"mean": 0.0224, "std": 0.0026},
                "trans_err_m": {"mean": 0.0043, "std": 0.0006}
            }
        }
    )

    n_trials: int = Field(..., ge=1)
    n_failed: int = Field(default=0, ge=0)
    master_seed: int = Field(default=0)
    rot_err_deg: Optional[AxisStats] = None
    trans_err_m: Optional[AxisStats] = None
    repeatability: Optional[RepeatabilityStats] = None
    trials: List[TrialResult] = Field(default_factory=list)


def _trial_iterations(report: CalibReport) -> List[TrialIteration]:
    return [
        TrialIteration(
            iteration=r.iteration,
            rot_err_deg=r.error.rot_deg if r.error else float("nan"),
            trans_err_m=r.error.trans_m if r.error else float("nan"),
            cost=r.final_cost,
            correspondences=r.correspondences,
            extrinsics=Extrinsics.from_arrays(np.array(r.q_LI), np.array(r.p_LI)),
        )
        for r in report.iterations
    ]


def run_trial(
    index: int,
    sim_config: SimConfig,
    calib_config: CalibConfig,
    master_seed: int,
) -> TrialResult:
    """Simulate and calibrate one sequence; failures are returned, not raised."""
    seed = derive_seed(master_seed, index)
    start_time = datetime.now()
    try:
        dataset = generate_dataset(sim_config, seed)
        report = calibrate(
            dataset.imu,
            dataset.scans,
            calib_config.model_copy(update={"seed": seed}),
            truth=dataset.truth,
        )
    except (CalibrationError, ValueError, np.linalg.LinAlgError) as e:
        stage = e.stage if isinstance(e, StageError) else None
        logger.warning(f"Trial {index} (seed {seed}) failed: {str(e)}")
        return TrialResult(trial=index, seed=seed, failure=str(e), stage=stage)

    duration = (datetime.now() - start_time).total_seconds()
    logger.info(
        f"Trial {index} finished in {duration:.1f} s: "
        f"{report.error.rot_deg:.4f} deg, {report.error.trans_m:.5f} m"
    )
    return TrialResult(
        trial=index,
        seed=seed,
        extrinsics=report.extrinsics,
        error=report.error,
        iterations=_trial_iterations(report),
    )


def summarize(results: Sequence[TrialResult], master_seed: int = 0) -> MonteCarloStats:
    """Mean and sample standard deviation of the errors of successful trials."""
    ok = [r for r in results if r.succeeded and r.error is not None]
    stats = MonteCarloStats(
        n_trials=len(results),
        n_failed=len(results) - len(ok),
        master_seed=master_seed,
        trials=list(results),
    )
    if not ok:
        return stats

    def axis(values: np.ndarray) -> AxisStats:
        std = float(np.std(values, ddof=1)) if len(values) > 1 else None
        return AxisStats(mean=float(np.mean(values)), std=std)

    stats.rot_err_deg = axis(np.array([r.error.rot_deg for r in ok]))
    stats.trans_err_m = axis(np.array([r.error.trans_m for r in ok]))
    stats.repeatability = repeatability([r.extrinsics for r in ok if r.extrinsics is not None])
    return stats


async def monte_carlo(
    n_trials: int,
    sim_config: Optional[SimConfig] = None,
    calib_config: Optional[CalibConfig] = None,
    master_seed: int = 0,
    threads: int = 1,
) -> MonteCarloStats:
    """Run independently seeded trials and aggregate their extrinsic errors.

    Trial ``i`` uses the seed derived from ``(master_seed, i)``, so results
    do not depend on ``threads`` or on completion order.

    Args:
        n_trials: Number of trials
        sim_config: Simulation settings shared by all trials
        calib_config: Calibration settings shared by all trials
        master_seed: Root of every trial seed
        threads: Worker processes; ``1`` runs trials one after another

    Returns:
        Aggregate statistics with per-trial results in trial order

    Raises:
        ValueError: If ``n_trials`` or ``threads`` is below one
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    sim_config = sim_config or SimConfig()
    calib_config = calib_config or CalibConfig()

    executor: Executor
    if threads > 1:
        executor = ProcessPoolExecutor(max_workers=threads)
    else:
        executor = ThreadPoolExecutor(max_workers=1)
    loop = asyncio.get_running_loop()
    logger.info(f"Starting {n_trials} Monte Carlo trials with {threads} worker(s)")
    try:
        tasks = [
            loop.run_in_executor(executor, run_trial, idx, sim_config, calib_config, master_seed)
            for idx in range(n_trials)
        ]
        results = await asyncio.gather(*tasks)
    finally:
        executor.shutdown(wait=True)

    stats = summarize(results, master_seed)
    if stats.n_failed:
        logger.warning(f"{stats.n_failed} of {n_trials} trials failed")
    return stats


def run_monte_carlo(
    n_trials: int,
    sim_config: Optional[SimConfig] = None,
    calib_config: Optional[CalibConfig] = None,
    master_seed: int = 0,
    threads: int = 1,
) -> MonteCarloStats:
    """Blocking wrapper around :func:`monte_carlo`."""
    return asyncio.run(monte_carlo(n_trials, sim_config, calib_config, master_seed, threads))
