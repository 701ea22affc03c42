"""
Dataset, report and statistics files read and written by the command line.

A dataset directory holds ``manifest.json``, an IMU CSV, one binary (or
CSV) file per scan with a JSON sidecar, and for simulated data the
ground-truth extrinsics and trajectory.
"""

import csv
import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.core.coordinator import GroundTruth
from src.core.errors import DatasetError
from src.core.report import CalibReport
from src.odometry import ScanPose, read_poses_csv
from src.rot_init import ImuSample
from src.sim import MonteCarloStats, SimDataset
from src.surfel_map import Scan
from src.trajectory import Extrinsics, TrajectoryRecord

logger = logging.getLogger(__name__)

IMU_HEADER = ["t", "wx", "wy", "wz", "ax", "ay", "az"]
SCAN_HEADER = ["t", "x", "y", "z"]
CONVERGENCE_HEADER = ["trial", "iteration", "rot_err_deg", "trans_err_m", "cost", "correspondences"]
SCAN_DTYPE = np.dtype([("t", "<f8"), ("x", "<f4"), ("y", "<f4"), ("z", "<f4")])

MANIFEST_NAME = "manifest.json"
IMU_NAME = "imu.csv"
SCAN_DIR = "scans"
TRUTH_EXTRINSICS_NAME = "truth_extrinsics.json"
TRUTH_TRAJECTORY_NAME = "truth_trajectory.json"

PathLike = Union[str, Path]
M = TypeVar("M", bound=BaseModel)


class TimeUnit(str, Enum):
    """Unit of every timestamp in a dataset."""
    SECONDS = "s"
    MILLISECONDS = "ms"
    MICROSECONDS = "us"
    NANOSECONDS = "ns"

    @property
    def scale(self) -> float:
        """Factor converting this unit to seconds."""
        return {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}[self.value]


class ScanFormat(str, Enum):
    BINARY = "bin"
    CSV = "csv"


class SensorMetadata(BaseModel):
    """Nominal sensor characteristics recorded alongside the data."""
    imu_rate: Optional[float] = Field(default=None, gt=0.0, description="IMU rate (Hz)")
    lidar_rate: Optional[float] = Field(default=None, gt=0.0, description="Scan rate (Hz)")
    sigma_gyro: Optional[float] = Field(default=None, ge=0.0, description="Gyroscope noise (rad/s)")
    sigma_accel: Optional[float] = Field(default=None, ge=0.0, description="Accelerometer noise (m/s^2)")
    lidar_beams: Optional[int] = Field(default=None, ge=1)


class DatasetManifest(BaseModel):
    """Index of a dataset directory; paths are relative to the manifest."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "imu_file": "imu.csv",
                "scan_directory": "scans",
                "scan_format": "bin",
                "time_unit": "s",
                "scans": 100,
                "sensors": {"imu_rate": 400.0, "lidar_rate": 10.0},
                "truth_extrinsics": "truth_extrinsics.json",
                "truth_trajectory": "truth_trajectory.json"
            }
        }
    )

    imu_file: str = Field(default=IMU_NAME, description="IMU CSV")
    scan_directory: str = Field(default=SCAN_DIR, description="Directory of per-scan files")
    scan_format: ScanFormat = Field(default=ScanFormat.BINARY)
    time_unit: TimeUnit = Field(default=TimeUnit.SECONDS)
    scans: int = Field(..., ge=0, description="Number of scans")
    sensors: SensorMetadata = Field(default_factory=SensorMetadata)
    truth_extrinsics: Optional[str] = Field(default=None, description="Ground-truth extrinsics JSON")
    truth_trajectory: Optional[str] = Field(default=None, description="Ground-truth trajectory JSON")
    odometry_file: Optional[str] = Field(default=None, description="Precomputed scan poses CSV")


class ScanSidecar(BaseModel):
    """JSON sidecar describing one scan file."""
    index: int = Field(..., ge=0)
    t_ref: float = Field(..., description="Reference time, in the dataset time unit")
    count: int = Field(..., ge=0, description="Number of points")
    file: str = Field(..., description="Point file name")


@dataclass(frozen=True, eq=False)
class LoadedDataset:
    """In-memory contents of a dataset directory."""
    manifest: DatasetManifest
    imu: List[ImuSample]
    scans: List[Scan]
    truth: Optional[GroundTruth] = None
    odometry: Optional[List[ScanPose]] = None


def _parse_model(model: Type[M], path: Path) -> M:
    try:
        return model.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as e:
        logger.error(f"Cannot read {path}: {e}")
        raise DatasetError(f"cannot read: {e}", str(path)) from e
    except ValidationError as e:
        logger.error(f"Invalid {model.__name__} in {path}: {e.error_count()} errors")
        raise DatasetError(f"invalid content: {e}", str(path)) from e


def _require(path: Path) -> Path:
    if not path.is_file():
        logger.error(f"Missing dataset file {path}")
        raise DatasetError("file not found", str(path))
    return path


def quantize_scan(scan: Scan) -> Scan:
    """Round point coordinates to the float32 precision of the binary format."""
    return scan.with_points(scan.points.astype(np.float32).astype(np.float64))


def write_imu_csv(path: PathLike, samples: Sequence[ImuSample]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        f.write("# t [s], gyro [rad/s], accel [m/s^2] in the IMU frame\n")
        writer = csv.writer(f)
        writer.writerow(IMU_HEADER)
        for s in samples:
            writer.writerow([repr(float(v)) for v in (s.t, *s.gyro, *s.accel)])


def read_imu_csv(path: PathLike, time_unit: TimeUnit = TimeUnit.SECONDS) -> List[ImuSample]:
    """Read IMU samples, skipping ``#`` comments and an optional header row.

    Raises:
        DatasetError: On a malformed row, non-finite value or non-increasing time
    """
    path = Path(path)
    samples: List[ImuSample] = []
    with path.open("r", newline="", encoding="utf-8") as f:
        for line, row in enumerate(csv.reader(f), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if [c.strip() for c in row] == IMU_HEADER:
                continue
            try:
                values = np.array([float(v) for v in row], dtype=float)
            except ValueError as e:
                raise DatasetError(f"malformed row: {e}", str(path), line) from e
            if len(values) != len(IMU_HEADER) or not np.all(np.isfinite(values)):
                raise DatasetError(f"expected {len(IMU_HEADER)} finite values", str(path), line)
            t = values[0] * time_unit.scale
            if samples and t <= samples[-1].t:
                raise DatasetError("timestamps must be strictly increasing", str(path), line)
            samples.append(ImuSample(t=t, gyro=values[1:4], accel=values[4:7]))
    if not samples:
        raise DatasetError("no IMU samples", str(path))
    return samples


def write_scan(directory: PathLike, index: int, scan: Scan, fmt: ScanFormat = ScanFormat.BINARY) -> Path:
    """Write one scan and its sidecar; returns the sidecar path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = f"scan_{index:05d}"
    if fmt is ScanFormat.BINARY:
        name = f"{stem}.bin"
        records = np.empty(len(scan), dtype=SCAN_DTYPE)
        records["t"] = scan.times
        records["x"], records["y"], records["z"] = scan.points.astype(np.float32).T
        records.tofile(directory / name)
    else:
        name = f"{stem}.csv"
        with (directory / name).open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(SCAN_HEADER)
            for t, p in zip(scan.times, scan.points):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in p])
    sidecar = ScanSidecar(index=index, t_ref=scan.t_ref, count=len(scan), file=name)
    path = directory / f"{stem}.json"
    path.write_text(sidecar.model_dump_json(indent=2), encoding="utf-8")
    return path


def _read_scan_csv(path: Path) -> np.ndarray:
    rows = []
    with path.open("r", newline="", encoding="utf-8") as f:
        for line, row in enumerate(csv.reader(f), start=1):
            if not row or row[0].lstrip().startswith("#") or [c.strip() for c in row] == SCAN_HEADER:
                continue
            try:
                values = [float(v) for v in row]
            except ValueError as e:
                raise DatasetError(f"malformed row: {e}", str(path), line) from e
            if len(values) != len(SCAN_HEADER):
                raise DatasetError(f"expected {len(SCAN_HEADER)} values", str(path), line)
            rows.append(values)
    return np.array(rows, dtype=float).reshape(-1, len(SCAN_HEADER))


def read_scan(sidecar_path: PathLike, time_unit: TimeUnit = TimeUnit.SECONDS) -> Scan:
    """Read a scan through its sidecar.

    Non-finite points are dropped with a warning.

    Raises:
        DatasetError: If the point file is missing, truncated or not time ordered
    """
    sidecar_path = _require(Path(sidecar_path))
    sidecar = _parse_model(ScanSidecar, sidecar_path)
    points_path = _require(sidecar_path.parent / sidecar.file)
    if points_path.suffix == ".bin":
        if points_path.stat().st_size != sidecar.count * SCAN_DTYPE.itemsize:
            raise DatasetError(
                f"expected {sidecar.count} records of {SCAN_DTYPE.itemsize} bytes", str(points_path)
            )
        records = np.fromfile(points_path, dtype=SCAN_DTYPE)
        times = records["t"].astype(np.float64)
        points = np.column_stack([records["x"], records["y"], records["z"]]).astype(np.float64)
    else:
        table = _read_scan_csv(points_path)
        if len(table) != sidecar.count:
            raise DatasetError(f"expected {sidecar.count} points, found {len(table)}", str(points_path))
        times, points = table[:, 0], table[:, 1:]

    finite = np.isfinite(times) & np.all(np.isfinite(points), axis=1)
    if not np.all(finite):
        logger.warning(f"Dropping {np.count_nonzero(~finite)} non-finite points from {points_path}")
        times, points = times[finite], points[finite]
    if np.any(np.diff(times) <= 0.0):
        raise DatasetError("point timestamps must be strictly increasing", str(points_path))
    scale = time_unit.scale
    return Scan(t_ref=sidecar.t_ref * scale, times=times * scale, points=points)


def write_truth(directory: PathLike, truth: GroundTruth) -> None:
    directory = Path(directory)
    (directory / TRUTH_EXTRINSICS_NAME).write_text(
        truth.extrinsics.model_dump_json(indent=2), encoding="utf-8"
    )
    (directory / TRUTH_TRAJECTORY_NAME).write_text(
        TrajectoryRecord.from_trajectory(truth.trajectory).model_dump_json(), encoding="utf-8"
    )


def write_dataset(
    directory: PathLike,
    dataset: SimDataset,
    fmt: ScanFormat = ScanFormat.BINARY,
) -> Path:
    """Write a simulated dataset and return the manifest path.

    Raises:
        DatasetError: If the directory cannot be created or written
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        write_imu_csv(directory / IMU_NAME, dataset.imu)
        for k, scan in enumerate(dataset.scans):
            write_scan(directory / SCAN_DIR, k, scan, fmt)
        write_truth(directory, dataset.truth)
        config = dataset.config
        manifest = DatasetManifest(
            scan_format=fmt,
            scans=len(dataset.scans),
            sensors=SensorMetadata(
                imu_rate=config.imu.rate,
                lidar_rate=config.lidar.rate,
                sigma_gyro=config.imu.sigma_gyro,
                sigma_accel=config.imu.sigma_accel,
                lidar_beams=len(config.lidar.elevations),
            ),
            truth_extrinsics=TRUTH_EXTRINSICS_NAME,
            truth_trajectory=TRUTH_TRAJECTORY_NAME,
        )
        path = directory / MANIFEST_NAME
        path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    except OSError as e:
        logger.error(f"Cannot write dataset to {directory}: {e}")
        raise DatasetError(f"cannot write dataset: {e}", str(directory)) from e
    logger.info(f"Wrote {len(dataset.imu)} IMU samples and {len(dataset.scans)} scans to {directory}")
    return path


def load_dataset(manifest_path: PathLike) -> LoadedDataset:
    """Read every file a manifest references.

    Raises:
        DatasetError: If a file is missing or fails to parse
    """
    manifest_path = _require(Path(manifest_path))
    manifest = _parse_model(DatasetManifest, manifest_path)
    root = manifest_path.parent
    unit = manifest.time_unit

    imu = read_imu_csv(_require(root / manifest.imu_file), unit)
    scan_dir = root / manifest.scan_directory
    scans = [read_scan(scan_dir / f"scan_{k:05d}.json", unit) for k in range(manifest.scans)]
    for k in range(1, len(scans)):
        if scans[k].t_ref <= scans[k - 1].t_ref:
            raise DatasetError(f"scan {k} does not start after scan {k - 1}", str(scan_dir))

    truth = None
    if manifest.truth_extrinsics and manifest.truth_trajectory:
        ext = _parse_model(Extrinsics, _require(root / manifest.truth_extrinsics))
        record = _parse_model(TrajectoryRecord, _require(root / manifest.truth_trajectory))
        truth = GroundTruth(trajectory=record.to_trajectory(), extrinsics=ext)

    odometry = None
    if manifest.odometry_file:
        odometry = read_poses_csv(_require(root / manifest.odometry_file))
        if len(odometry) != len(scans):
            raise DatasetError(f"{len(odometry)} poses for {len(scans)} scans", manifest.odometry_file)

    logger.info(f"Loaded {len(imu)} IMU samples and {len(scans)} scans from {root}")
    return LoadedDataset(manifest=manifest, imu=imu, scans=scans, truth=truth, odometry=odometry)


def write_report(path: PathLike, report: BaseModel) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2, by_alias=True), encoding="utf-8")
    return path


def read_report(path: PathLike) -> CalibReport:
    return _parse_model(CalibReport, Path(path))


def read_stats(path: PathLike) -> MonteCarloStats:
    return _parse_model(MonteCarloStats, Path(path))


def convergence_path(report_path: PathLike) -> Path:
    """``<report stem>_convergence.csv`` next to the report."""
    report_path = Path(report_path)
    return report_path.with_name(f"{report_path.stem}_convergence.csv")


def write_convergence_csv(path: PathLike, stats: MonteCarloStats) -> int:
    """One row per refinement round of every successful trial; returns the row count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = 0
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CONVERGENCE_HEADER)
        for trial in stats.trials:
            for it in trial.iterations:
                writer.writerow([
                    trial.trial,
                    it.iteration,
                    repr(it.rot_err_deg),
                    repr(it.trans_err_m),
                    repr(it.cost),
                    it.correspondences,
                ])
                rows += 1
    return rows


def read_convergence_csv(path: PathLike) -> List[dict]:
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CONVERGENCE_HEADER:
            raise DatasetError(f"expected header {','.join(CONVERGENCE_HEADER)}", str(path), 1)
        return [
            {
                "trial": int(row["trial"]),
                "iteration": int(row["iteration"]),
                "rot_err_deg": float(row["rot_err_deg"]),
                "trans_err_m": float(row["trans_err_m"]),
                "cost": float(row["cost"]),
                "correspondences": int(row["correspondences"]),
            }
            for row in reader
        ]


def _vector(values: Sequence[float], precision: int) -> str:
    return ", ".join(f"{v: .{precision}f}" for v in values)


def format_summary(report: CalibReport) -> str:
    """Plain-text summary of a calibration report."""
    ext = report.extrinsics
    lines = [
        "LiDAR-IMU extrinsic calibration",
        "===============================",
        f"rounds:                {len(report.iterations)}",
        f"q_LI (w, x, y, z):     {_vector(ext.q_LI, 6)}",
        f"p_LI x, y, z (m):      {_vector(ext.p_LI, 4)}",
        f"roll, pitch, yaw (deg): {_vector(report.euler_deg, 3)}",
        f"gyro bias (rad/s):     {_vector(report.bias_g, 5)}",
        f"accel bias (m/s^2):    {_vector(report.bias_a, 4)}",
        f"gravity (m/s^2):       {_vector(report.gravity, 4)}",
        f"mean |omega| (deg/s):  {report.excitation.mean_angular_velocity_deg:.2f}",
    ]
    if report.iterations:
        last = report.iterations[-1]
        lines.append(f"final cost:            {last.final_cost:.6e} ({last.correspondences} correspondences)")
    if report.error is not None:
        lines += [
            "",
            "Error against ground truth",
            "--------------------------",
            f"rotation (deg):        {report.error.rot_deg:.4f}",
            f"translation (m):       {report.error.trans_m:.5f}",
        ]
        if report.trajectory_error is not None:
            ate = report.trajectory_error
            lines.append(f"trajectory RMSE:       {ate.trans_rmse:.5f} m, {ate.rot_rmse_deg:.4f} deg")
    if report.timing:
        lines += ["", "Timing (s)", "----------"]
        lines += [f"{stage:<22} {seconds:.2f}" for stage, seconds in report.timing.items()]
    return "\n".join(lines) + "\n"


def format_stats(stats: MonteCarloStats) -> str:
    """Mean and standard deviation table of a Monte Carlo run."""

    def cell(axis) -> str:
        if axis is None:
            return "n/a"
        std = "n/a" if axis.std is None else f"{axis.std:.6f}"
        return f"{axis.mean:.6f} +- {std}"

    lines = [
        f"trials: {stats.n_trials} ({stats.n_failed} failed)",
        f"rotation error (deg):  {cell(stats.rot_err_deg)}",
        f"translation error (m): {cell(stats.trans_err_m)}",
    ]
    rep = stats.repeatability
    if rep is not None:
        for name in ("x", "y", "z", "roll", "pitch", "yaw"):
            lines.append(f"{name:<6} {cell(getattr(rep, name))}")
    for trial in stats.trials:
        if not trial.succeeded:
            lines.append(f"trial {trial.trial} failed in {trial.stage or 'setup'}: {trial.failure}")
    return "\n".join(lines) + "\n"


def dump_json(data: object) -> str:
    return json.dumps(data, indent=2, sort_keys=True)
