"""
Core coordinator for the calibration pipeline.
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.config import GRAVITY_MAGNITUDE, CalibConfig, OdometrySource
from src.core.errors import (
    CalibrationError,
    ConfigError,
    ExcitationError,
    InsufficientDataError,
    StageError,
)
from src.core.deskew import DeskewMode, deskew_scan, rotation_only_trajectory
from src.core.metrics import (
    absolute_trajectory_error,
    extrinsic_error,
    imu_residual_stats,
    motion_excitation,
    ExtrinsicError,
)
from src.core.report import CalibReport, IterationRecord
from src.odometry import IcpOdometry, ScanPose, oracle_odometry, relative_pose
from src.odometry.icp import RotationPrior
from src.optimizer import CalibState, ConvergenceReport, Problem, solve_lm
from src.rot_init import ImuSample, RotationInit, initialize_rotation, relative_rotation
from src.splines import KnotGrid, SplineR3, SplineSO3
from src.splines.quaternion import quat_conjugate, quat_multiply, quat_rotate
from src.surfel_map import (
    CorrespondenceSet,
    DiscretePoseSource,
    Scan,
    SurfelMap,
    TrajectoryPoseSource,
    associate,
    build_map,
    downsample,
    dump_surfels,
)
from src.trajectory import Extrinsics, Trajectory, lidar_point_to_map
from src.trajectory.fitting import fit_positions

logger = logging.getLogger(__name__)

STAGE_ROTATION_INIT = "rotation-init"
STAGE_ASSOCIATION = "association"
STAGE_OPTIMIZATION = "optimization"
STAGE_REFINEMENT = "refinement"


@dataclass(frozen=True)
class GroundTruth:
    """Known trajectory and extrinsics of a simulated dataset."""
    trajectory: Trajectory
    extrinsics: Extrinsics


@dataclass
class _Window:
    """Data restricted to the calibration knot grid."""
    grid: KnotGrid
    imu: List[ImuSample]
    scans: List[Scan]
    kept: List[int]

    @property
    def t_map(self) -> float:
        return self.scans[0].t_ref

    @property
    def scan_times(self) -> np.ndarray:
        return np.array([s.t_ref for s in self.scans])


class CalibrationCoordinator:
    """Runs rotation initialization, association, optimization and refinement."""

    def __init__(
        self,
        config: Optional[CalibConfig] = None,
        truth: Optional[GroundTruth] = None,
        surfel_dump_dir: Optional[Path] = None,
    ):
        """Initialize the coordinator.

        Args:
            config: Calibration configuration
            truth: Ground truth, required by the oracle odometry source
            surfel_dump_dir: Directory for per-round surfel dumps
        """
        self.config = config or CalibConfig()
        self.truth = truth
        self.surfel_dump_dir = surfel_dump_dir
        self.timings: Dict[str, float] = {}

    @contextmanager
    def _stage(self, name: str) -> Iterator[None]:
        start_time = datetime.now()
        try:
            yield
        except StageError:
            raise
        except (CalibrationError, ValueError, np.linalg.LinAlgError) as e:
            logger.error(f"Stage {name} failed: {str(e)}")
            raise StageError(name, e) from e
        finally:
            duration = (datetime.now() - start_time).total_seconds()
            self.timings[name] = self.timings.get(name, 0.0) + duration

    def _seed(self, round_index: int, scan_index: int) -> int:
        sequence = np.random.SeedSequence([self.config.seed, round_index, scan_index])
        return int(sequence.generate_state(1)[0])

    def _window(self, imu: Sequence[ImuSample], scans: Sequence[Scan]) -> _Window:
        """Check preconditions and restrict the data to one knot grid.

        Raises:
            InsufficientDataError: Without data or with too short an overlap
            ExcitationError: If the mean angular speed is below the floor
        """
        cfg = self.config
        if not imu or not scans:
            raise InsufficientDataError(f"{len(imu)} IMU samples and {len(scans)} scans")
        t_imu = np.array([s.t for s in imu])
        starts = np.array([s.t_ref for s in scans])
        after = np.flatnonzero(t_imu >= starts[0])
        if len(after) == 0:
            raise InsufficientDataError("IMU data ends before the first scan")
        t_start = float(t_imu[after[0]])
        t_stop = min(float(t_imu[-1]), max(s.t_end for s in scans))
        if t_stop - t_start < cfg.min_duration:
            raise InsufficientDataError(
                f"overlap of {t_stop - t_start:.2f} s is shorter than {cfg.min_duration:.2f} s"
            )
        excitation = motion_excitation(imu)
        if excitation.mean_angular_velocity < cfg.min_angular_velocity:
            raise ExcitationError(
                f"mean angular velocity {excitation.mean_angular_velocity:.4f} rad/s "
                f"below {cfg.min_angular_velocity:.4f} rad/s"
            )

        grid = KnotGrid.covering(t_start, t_stop, cfg.knot_dt)
        imu_in = [s for s in imu if grid.contains(s.t)]
        kept: List[int] = []
        scans_in: List[Scan] = []
        dropped_points = 0
        for k, scan in enumerate(scans):
            if not grid.contains(scan.t_ref):
                continue
            inside = grid.contains(scan.times)
            dropped_points += int(np.count_nonzero(~inside))
            kept.append(k)
            scans_in.append(scan.subset(inside))
        if len(scans_in) < 2:
            raise InsufficientDataError(f"{len(scans_in)} scans inside the calibration window")
        logger.info(
            f"Calibration window [{grid.t0:.3f}, {grid.t_end:.3f}) s: {grid.n} control points, "
            f"{len(imu_in)}/{len(imu)} IMU samples, {len(scans_in)}/{len(scans)} scans, "
            f"{dropped_points} points outside"
        )
        return _Window(grid=grid, imu=imu_in, scans=scans_in, kept=kept)

    def _rotation_prior(self, init: RotationInit) -> RotationPrior:
        q_LI = init.q_LI

        def prior(t_a: float, t_b: float) -> np.ndarray:
            dq = relative_rotation(init.gyro_spline, t_a, t_b)
            return quat_multiply(quat_multiply(quat_conjugate(q_LI), dq), q_LI)

        return prior

    def _odometry(self, window: _Window, init: Optional[RotationInit] = None) -> List[ScanPose]:
        cfg = self.config
        if cfg.odometry_source is OdometrySource.ORACLE:
            if self.truth is None:
                raise ConfigError("oracle odometry requires ground truth")
            return oracle_odometry(
                self.truth.trajectory,
                self.truth.extrinsics,
                window.scan_times,
                (cfg.oracle_sigma_rot, cfg.oracle_sigma_trans),
                seed=cfg.seed,
                t_map=window.t_map,
            )
        scans = window.scans
        prior = None
        if init is not None:
            ext = Extrinsics.from_arrays(init.q_LI, np.zeros(3))
            spin = rotation_only_trajectory(init.gyro_spline)
            scans = [deskew_scan(s, spin, ext, DeskewMode.ROTATION) for s in scans]
            prior = self._rotation_prior(init)
        odometry = IcpOdometry(
            cfg.surfel,
            cfg.cell_size,
            max_iters=cfg.icp_max_iters,
            max_distance=cfg.icp_max_distance,
            seed=cfg.seed,
            rotation_prior=prior,
        )
        return odometry.estimate(scans)

    def _initial_gravity(self, rot: SplineSO3, pos: SplineR3, imu: Sequence[ImuSample]) -> np.ndarray:
        """Gravity from the mean specific force over the first window of data."""
        t_first = imu[0].t
        window = [s for s in imu if s.t < t_first + self.config.gravity_init_window]
        t = np.array([s.t for s in window])
        accel = np.array([s.accel for s in window])
        gravity = np.mean(pos.acceleration(t) - quat_rotate(rot.orientation(t), accel), axis=0)
        norm = np.linalg.norm(gravity)
        if norm < 1e-6:
            return np.array([0.0, 0.0, -GRAVITY_MAGNITUDE])
        return GRAVITY_MAGNITUDE * gravity / norm

    def _initial_state(
        self, window: _Window, init: RotationInit, poses: List[ScanPose]
    ) -> CalibState:
        """Trajectory from the gyro spline and odometry positions with a zero lever arm.

        The gyro bias found during rotation initialization seeds ``bias_g``.
        """
        rot = init.gyro_spline
        q_map = rot.orientation(window.t_map)
        origins = np.array([p.p for p in poses])
        positions = quat_rotate(q_map, quat_rotate(init.q_LI, origins))
        pos = fit_positions(window.grid, window.scan_times, positions)
        gravity = self._initial_gravity(rot, pos, window.imu)
        traj = Trajectory(rot=rot, pos=pos, gravity=gravity)
        return CalibState.from_trajectory(
            traj, Extrinsics.from_arrays(init.q_LI, np.zeros(3)), bias_g=init.bias_g
        )

    def _associate(
        self, surfel_map: SurfelMap, window: _Window, state: CalibState, round_index: int
    ) -> CorrespondenceSet:
        cfg = self.config
        traj = state.to_trajectory()
        parts = []
        for k, scan in enumerate(window.scans):
            sample = downsample(scan, cfg.surfel.downsample_ratio, self._seed(round_index, k))
            if len(sample) == 0:
                continue
            mapped = lidar_point_to_map(traj, state.ext, sample.points, sample.times, window.t_map)
            parts.append(associate(
                mapped,
                surfel_map,
                cfg.surfel.reject_dist,
                raw_points=sample.points,
                times=sample.times,
                t_map=window.t_map,
            ))
        correspondences = CorrespondenceSet.concatenate(parts)
        if len(correspondences) == 0:
            raise InsufficientDataError("no point-to-surfel correspondences")
        logger.info(
            f"Round {round_index}: {len(correspondences)} correspondences "
            f"against {len(surfel_map.surfel_list)} surfels"
        )
        return correspondences

    def _extract(self, surfel_map: SurfelMap, threshold: float, round_index: int) -> None:
        cfg = self.config
        count = surfel_map.extract_surfels(threshold, cfg.surfel, cfg.seed)
        if count == 0:
            raise InsufficientDataError(f"no surfels at plane-likeness threshold {threshold:.2f}")
        if self.surfel_dump_dir is not None:
            path = Path(self.surfel_dump_dir) / f"surfels_iter{round_index:02d}.jsonl"
            dump_surfels(path, surfel_map.surfel_list)

    def _optimize(
        self, window: _Window, correspondences: CorrespondenceSet, state: CalibState
    ) -> Tuple[CalibState, ConvergenceReport, Problem]:
        cfg = self.config
        problem = Problem(
            imu_samples=window.imu,
            correspondences=correspondences,
            noise=cfg.noise,
            grid=window.grid,
            t_map=window.t_map,
            huber_delta=cfg.solver.huber_delta if cfg.solver.use_huber else None,
        )
        state, convergence = solve_lm(problem, state, cfg.solver)
        return state, convergence, problem

    def _record(
        self,
        round_index: int,
        state: CalibState,
        convergence: ConvergenceReport,
        problem: Problem,
        surfel_map: SurfelMap,
        threshold: float,
    ) -> IterationRecord:
        ra, rg, _ = problem.residuals(state)
        error = None
        if self.truth is not None:
            rot_err, trans_err = extrinsic_error(state.ext, self.truth.extrinsics)
            error = ExtrinsicError(rot_deg=rot_err, trans_m=trans_err)
        record = IterationRecord(
            iteration=round_index,
            q_LI=list(state.ext.q_LI),
            p_LI=list(state.ext.p_LI),
            euler_deg=[float(v) for v in state.ext.euler_deg()],
            initial_cost=convergence.initial_cost,
            final_cost=convergence.final_cost,
            cost_curve=[it.cost for it in convergence.iterations if it.accepted],
            correspondences=problem.measurements.n_lidar,
            surfels=len(surfel_map.surfel_list),
            planarity_threshold=threshold,
            imu_residuals=imu_residual_stats(ra, rg),
            error=error,
            convergence=convergence,
        )
        logger.info(
            f"Round {round_index}: cost {convergence.initial_cost:.4e} -> {convergence.final_cost:.4e}, "
            f"p_LI = {np.array2string(state.ext.translation, precision=4)}, "
            f"euler = {np.array2string(state.ext.euler_deg(), precision=3)} deg"
        )
        return record

    def _plateaued(self, previous: CalibState, current: CalibState) -> bool:
        rot, trans = extrinsic_error(current.ext, previous.ext)
        return trans < self.config.plateau_trans_tol and rot < self.config.plateau_rot_tol_deg

    def run(
        self,
        imu: Sequence[ImuSample],
        scans: Sequence[Scan],
        odometry: Optional[Sequence[ScanPose]] = None,
    ) -> CalibReport:
        """Calibrate from raw IMU samples and scans.

        Args:
            imu: IMU samples with increasing timestamps
            scans: Raw scans ordered by reference time
            odometry: Optional precomputed pose of every scan, replacing the
                configured pose source

        Returns:
            Report with one record per optimization round

        Raises:
            InsufficientDataError: If the data does not cover the minimum duration
            ExcitationError: If the motion is too weak
            StageError: Wrapping any failure inside a pipeline stage
        """
        cfg = self.config
        self.timings = {}
        window = self._window(imu, scans)

        with self._stage(STAGE_ROTATION_INIT):
            if odometry is not None:
                poses = [odometry[k] for k in window.kept]
            else:
                poses = self._odometry(window)
            poses = [
                ScanPose(p.t, *relative_pose(poses[0], p), fitness=p.fitness) for p in poses
            ]
            rotations = np.array([p.q for p in poses])
            init = initialize_rotation(
                window.imu,
                window.scan_times,
                rotations,
                window.grid,
                cfg.handeye_threshold,
                estimate_bias=cfg.estimate_gyro_bias,
            )
            if odometry is None and cfg.odometry_source is OdometrySource.ICP:
                poses = self._odometry(window, init)

        with self._stage(STAGE_ASSOCIATION):
            state = self._initial_state(window, init, poses)
            spin = rotation_only_trajectory(init.gyro_spline)
            ext0 = Extrinsics.from_arrays(init.q_LI, np.zeros(3))
            deskewed = [deskew_scan(s, spin, ext0, DeskewMode.ROTATION) for s in window.scans]
            source = DiscretePoseSource(
                np.array([p.q for p in poses]), np.array([p.p for p in poses])
            )
            surfel_map = build_map(deskewed, source, cfg.cell_size)
            threshold = cfg.surfel.planarity_first
            self._extract(surfel_map, threshold, 1)
            correspondences = self._associate(surfel_map, window, state, 1)

        with self._stage(STAGE_OPTIMIZATION):
            state, convergence, problem = self._optimize(window, correspondences, state)
            records = [self._record(1, state, convergence, problem, surfel_map, threshold)]

        threshold = cfg.surfel.planarity_later
        for round_index in range(2, cfg.iterations + 1):
            with self._stage(STAGE_REFINEMENT):
                previous = state
                source_traj = TrajectoryPoseSource(state.to_trajectory(), state.ext, window.t_map)
                surfel_map = build_map(window.scans, source_traj, cfg.cell_size)
                self._extract(surfel_map, threshold, round_index)
                correspondences = self._associate(surfel_map, window, state, round_index)
                state, convergence, problem = self._optimize(window, correspondences, state)
                records.append(
                    self._record(round_index, state, convergence, problem, surfel_map, threshold)
                )
            if cfg.early_exit and self._plateaued(previous, state):
                logger.info(f"Estimate plateaued after round {round_index}")
                break

        return self._report(window, init, state, records, imu)

    def _report(
        self,
        window: _Window,
        init: RotationInit,
        state: CalibState,
        records: List[IterationRecord],
        imu: Sequence[ImuSample],
    ) -> CalibReport:
        error = None
        trajectory_error = None
        if self.truth is not None:
            rot_err, trans_err = extrinsic_error(state.ext, self.truth.extrinsics)
            error = ExtrinsicError(rot_deg=rot_err, trans_m=trans_err)
            trajectory_error = absolute_trajectory_error(
                state.to_trajectory(), self.truth.trajectory, window.scan_times
            )
        report = CalibReport(
            extrinsics=state.ext,
            euler_deg=[float(v) for v in state.ext.euler_deg()],
            initial_rotation=[float(v) for v in init.q_LI],
            bias_a=[float(v) for v in state.bias_a],
            bias_g=[float(v) for v in state.bias_g],
            gravity=[float(v) for v in state.gravity],
            iterations=records,
            excitation=motion_excitation(imu),
            error=error,
            trajectory_error=trajectory_error,
            config=self.config,
            timing=dict(self.timings) if self.config.report_timing else None,
        )
        logger.info(
            f"Calibration finished after {len(records)} rounds: "
            f"q_LI = {np.array2string(state.ext.rotation, precision=6)}, "
            f"p_LI = {np.array2string(state.ext.translation, precision=4)} m"
        )
        return report


def calibrate(
    imu: Sequence[ImuSample],
    scans: Sequence[Scan],
    config: Optional[CalibConfig] = None,
    truth: Optional[GroundTruth] = None,
    odometry: Optional[Sequence[ScanPose]] = None,
    surfel_dump_dir: Optional[Path] = None,
) -> CalibReport:
    """Run the full calibration pipeline.

    Args:
        imu: IMU samples
        scans: Raw scans
        config: Calibration configuration
        truth: Ground truth for the oracle pose source and error reporting
        odometry: Optional precomputed scan poses
        surfel_dump_dir: Directory for per-round surfel dumps

    Returns:
        Calibration report
    """
    coordinator = CalibrationCoordinator(config, truth, surfel_dump_dir)
    return coordinator.run(imu, scans, odometry)
