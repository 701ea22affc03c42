"""
Tests for dataset files, report formatting and the command-line entry point.
"""

import json

import numpy as np
import pytest
from pydantic import ValidationError

from src.cli.io import (
    CONVERGENCE_HEADER,
    IMU_HEADER,
    MANIFEST_NAME,
    ScanFormat,
    TimeUnit,
    convergence_path,
    format_stats,
    format_summary,
    load_dataset,
    quantize_scan,
    read_convergence_csv,
    read_imu_csv,
    read_report,
    read_scan,
    write_convergence_csv,
    write_dataset,
    write_imu_csv,
    write_report,
    write_scan,
)
from src.cli.main import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, exit_code, main
from src.config import CalibConfig, dump_config
from src.core.errors import (
    ConfigError,
    DatasetError,
    ExcitationError,
    ObservabilityError,
    StageError,
)
from src.core.metrics import ExtrinsicError
from src.core.report import CalibReport
from src.rot_init import ImuSample
from src.sim import LidarModel, SimConfig, summarize
from src.sim.montecarlo import TrialIteration, TrialResult
from src.surfel_map import Scan
from src.trajectory import Extrinsics


def report_with(error=None) -> CalibReport:
    ext = Extrinsics.from_euler(np.array([10.0, 10.0, 10.0]), np.array([0.1, -0.05, 0.15]))
    return CalibReport(
        extrinsics=ext,
        euler_deg=[float(v) for v in ext.euler_deg()],
        initial_rotation=list(ext.q_LI),
        bias_a=[0.0] * 3,
        bias_g=[0.0] * 3,
        gravity=[0.0, 0.0, -9.81],
        error=error,
    )


def trial(index: int, rounds: int) -> TrialResult:
    return TrialResult(
        trial=index,
        seed=index,
        extrinsics=report_with().extrinsics,
        error=ExtrinsicError(rot_deg=0.01, trans_m=0.002),
        iterations=[
            TrialIteration(iteration=k + 1, rot_err_deg=0.01, trans_err_m=0.002, cost=1.0, correspondences=100)
            for k in range(rounds)
        ],
    )


def test_imu_csv_round_trip(tmp_path, rng):
    samples = [
        ImuSample(t=0.01 * k, gyro=rng.normal(size=3), accel=rng.normal(size=3)) for k in range(20)
    ]
    path = tmp_path / "imu.csv"
    write_imu_csv(path, samples)
    restored = read_imu_csv(path)
    assert len(restored) == 20
    for a, b in zip(restored, samples):
        assert a.t == b.t
        np.testing.assert_array_equal(a.gyro, b.gyro)
        np.testing.assert_array_equal(a.accel, b.accel)


def test_imu_time_unit_is_applied(tmp_path):
    path = tmp_path / "imu.csv"
    path.write_text(",".join(IMU_HEADER) + "\n1000,0,0,0,0,0,9.81\n2000,0,0,0,0,0,9.81\n")
    samples = read_imu_csv(path, TimeUnit.MILLISECONDS)
    assert [s.t for s in samples] == pytest.approx([1.0, 2.0])


@pytest.mark.parametrize(
    "body, line",
    [
        ("0.0,0,0,0,0,0,9.81\n0.1,0,0,abc,0,0,9.81\n", 3),
        ("0.0,0,0,0,0,0,9.81\n0.1,0,0,0,0,0\n", 3),
        ("0.0,0,0,0,0,0,9.81\n0.0,0,0,0,0,0,9.81\n", 3),
        ("# comment\n0.0,0,0,0,0,nan,9.81\n", 3),
    ],
)
def test_corrupt_imu_row_names_file_and_line(tmp_path, body, line):
    path = tmp_path / "imu.csv"
    path.write_text(",".join(IMU_HEADER) + "\n" + body)
    with pytest.raises(DatasetError) as exc:
        read_imu_csv(path)
    assert exc.value.line == line
    assert str(exc.value).startswith(f"{path}:{line}:")


def test_empty_imu_file_is_rejected(tmp_path):
    path = tmp_path / "imu.csv"
    path.write_text(",".join(IMU_HEADER) + "\n")
    with pytest.raises(DatasetError):
        read_imu_csv(path)


@pytest.mark.parametrize("fmt", [ScanFormat.BINARY, ScanFormat.CSV])
def test_scan_round_trip_after_quantization(tmp_path, rng, fmt):
    times = 1.0 + np.sort(rng.uniform(0.0, 0.1, size=50))
    scan = quantize_scan(Scan(1.0, times, rng.normal(scale=5.0, size=(50, 3))))
    sidecar = write_scan(tmp_path, 4, scan, fmt)
    assert sidecar.name == "scan_00004.json"
    restored = read_scan(sidecar)
    assert restored.t_ref == scan.t_ref
    np.testing.assert_array_equal(restored.times, scan.times)
    np.testing.assert_array_equal(restored.points, scan.points)


def test_truncated_binary_scan_is_rejected(tmp_path, rng):
    scan = Scan(0.0, np.linspace(0.0, 0.09, 10), rng.normal(size=(10, 3)))
    sidecar = write_scan(tmp_path, 0, scan)
    point_file = tmp_path / "scan_00000.bin"
    point_file.write_bytes(point_file.read_bytes()[:-5])
    with pytest.raises(DatasetError):
        read_scan(sidecar)


def test_missing_manifest_is_a_dataset_error(tmp_path):
    with pytest.raises(DatasetError) as exc:
        load_dataset(tmp_path / MANIFEST_NAME)
    assert exc.value.path.endswith(MANIFEST_NAME)


def test_dataset_round_trip(tmp_path, short_dataset):
    manifest = write_dataset(tmp_path, short_dataset)
    loaded = load_dataset(manifest)
    assert loaded.manifest.scans == len(short_dataset.scans)
    assert loaded.manifest.sensors.imu_rate == short_dataset.config.imu.rate
    assert len(loaded.imu) == len(short_dataset.imu)
    np.testing.assert_array_equal(loaded.imu[5].accel, short_dataset.imu[5].accel)

    original = quantize_scan(short_dataset.scans[3])
    np.testing.assert_array_equal(loaded.scans[3].points, original.points)
    np.testing.assert_array_equal(loaded.scans[3].times, original.times)

    assert loaded.truth.extrinsics == short_dataset.truth.extrinsics
    np.testing.assert_allclose(
        loaded.truth.trajectory.rot.ctrl, short_dataset.truth.trajectory.rot.ctrl, atol=1e-15
    )
    assert loaded.odometry is None


def test_exit_codes():
    assert exit_code(DatasetError("bad", "imu.csv", 3)) == EXIT_VALIDATION
    assert exit_code(ExcitationError("still")) == EXIT_VALIDATION
    assert exit_code(StageError("rotation-init", ConfigError("no truth"))) == EXIT_VALIDATION
    assert exit_code(ObservabilityError("rank", ["ext_trans_x"])) == EXIT_NUMERICAL
    assert exit_code(StageError("optimization", ObservabilityError("rank", []))) == EXIT_NUMERICAL
    with pytest.raises(ValidationError) as exc:
        CalibConfig(iterations=0)
    assert exit_code(exc.value) == EXIT_VALIDATION


def test_summary_lists_error_block_only_with_truth():
    plain = format_summary(report_with())
    assert "q_LI" in plain
    assert "ground truth" not in plain

    scored = format_summary(report_with(ExtrinsicError(rot_deg=0.0123, trans_m=0.00456)))
    assert "Error against ground truth" in scored
    assert "0.0123" in scored and "0.00456" in scored


def test_report_file_round_trip(tmp_path):
    report = report_with(ExtrinsicError(rot_deg=0.02, trans_m=0.003))
    path = write_report(tmp_path / "out" / "report.json", report)
    assert read_report(path) == report


def test_stats_of_single_trial_print_na():
    text = format_stats(summarize([trial(0, 2)]))
    assert text.startswith("trials: 1 (0 failed)")
    assert "n/a" in text


def test_failed_trials_are_listed():
    failed = TrialResult(trial=1, seed=1, failure="rank deficient", stage="optimization")
    text = format_stats(summarize([trial(0, 1), failed]))
    assert "trial 1 failed in optimization: rank deficient" in text


def test_convergence_csv_has_one_row_per_round(tmp_path):
    stats = summarize([trial(0, 2), trial(1, 3), TrialResult(trial=2, seed=2, failure="x")])
    path = convergence_path(tmp_path / "mc.json")
    assert path.name == "mc_convergence.csv"
    assert write_convergence_csv(path, stats) == 5
    rows = read_convergence_csv(path)
    assert [(r["trial"], r["iteration"]) for r in rows] == [(0, 1), (0, 2), (1, 1), (1, 2), (1, 3)]
    assert path.read_text().splitlines()[0] == ",".join(CONVERGENCE_HEADER)


def test_schema_command_prints_both_schemas(capsys):
    assert main(["schema"]) == EXIT_OK
    schemas = json.loads(capsys.readouterr().out)
    assert set(schemas) == {"CalibConfig", "SimConfig"}


def test_calibrate_with_missing_manifest_exits_with_validation_code(tmp_path, capsys):
    code = main(["calibrate", "--manifest", str(tmp_path / "none.json"), "--report", str(tmp_path / "r.json")])
    assert code == EXIT_VALIDATION
    assert "file not found" in capsys.readouterr().err


def test_bad_config_file_exits_with_validation_code(tmp_path):
    config = tmp_path / "calib.json"
    config.write_text(json.dumps({"iterations": -1}))
    code = main([
        "calibrate",
        "--manifest", str(tmp_path / MANIFEST_NAME),
        "--config", str(config),
        "--report", str(tmp_path / "r.json"),
    ])
    assert code == EXIT_VALIDATION


def test_simulate_command_writes_loadable_dataset(tmp_path):
    config = tmp_path / "sim.json"
    config.write_text(dump_config(SimConfig(duration=0.5, lidar=LidarModel(azimuth_steps=36))))
    out = tmp_path / "data"
    code = main(["simulate", "--config", str(config), "--out", str(out), "--seed", "2", "--format", "csv"])
    assert code == EXIT_OK
    loaded = load_dataset(out / MANIFEST_NAME)
    assert loaded.manifest.scan_format is ScanFormat.CSV
    assert len(loaded.scans) == 5
    assert loaded.truth is not None


def test_report_with_wrong_content_names_the_file(tmp_path):
    path = tmp_path / "report.json"
    path.write_text(json.dumps({"extrinsics": {"q_LI": [0.0, 0.0, 0.0, 0.0]}}))
    with pytest.raises(DatasetError) as exc:
        read_report(path)
    assert exc.value.path == str(path)
    assert "invalid content" in str(exc.value)
