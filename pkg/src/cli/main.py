"""
Command-line entry point: ``licalib {simulate,calibrate,montecarlo,schema}``.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from src.config import CalibConfig, dump_config_schema, load_config
from src.config.settings import get_settings
from src.core.coordinator import calibrate
from src.core.errors import (
    CalibrationError,
    ConfigError,
    DatasetError,
    ExcitationError,
    InsufficientDataError,
    StageError,
)
from src.sim import SimConfig, generate_dataset, run_monte_carlo

from .io import (
    ScanFormat,
    convergence_path,
    dump_json,
    format_stats,
    format_summary,
    load_dataset,
    quantize_scan,
    write_convergence_csv,
    write_dataset,
    write_report,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

VALIDATION_ERRORS = (ConfigError, DatasetError, InsufficientDataError, ExcitationError, ValidationError)


def exit_code(error: Exception) -> int:
    """Exit code for a failure, looking through stage wrappers."""
    cause = error.error if isinstance(error, StageError) else error
    if isinstance(cause, VALIDATION_ERRORS):
        return EXIT_VALIDATION
    return EXIT_NUMERICAL


def _validated(model: Any, base: Any, updates: Dict[str, Any]) -> Any:
    data = base.model_dump()
    for key, value in updates.items():
        if value is None:
            continue
        section, _, field = key.partition(".")
        if field:
            data[section][field] = value
        else:
            data[section] = value
    return model.model_validate(data)


def calib_config_from_args(
    args: argparse.Namespace, path: Optional[str], solver_threads: bool = True
) -> CalibConfig:
    """Calibration config from an optional file with command-line overrides."""
    base = load_config(path) if path else CalibConfig()
    threads = getattr(args, "threads", None) if solver_threads else None
    return _validated(CalibConfig, base, {
        "seed": getattr(args, "seed", None),
        "iterations": getattr(args, "iterations", None),
        "profile": getattr(args, "profile", None),
        "odometry_source": getattr(args, "odometry", None),
        "solver.threads": threads,
    })


def sim_config_from_args(args: argparse.Namespace) -> SimConfig:
    base = load_config(args.config, SimConfig) if args.config else SimConfig()
    return _validated(SimConfig, base, {"seed": args.seed})


def cmd_simulate(args: argparse.Namespace) -> int:
    config = sim_config_from_args(args)
    dataset = generate_dataset(config)
    dataset = type(dataset)(
        imu=dataset.imu,
        scans=[quantize_scan(s) for s in dataset.scans],
        truth=dataset.truth,
        config=dataset.config,
    )
    manifest = write_dataset(args.out, dataset, ScanFormat(args.format))
    print(f"Wrote {len(dataset.imu)} IMU samples and {len(dataset.scans)} scans to {manifest}")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    config = calib_config_from_args(args, args.config)
    dataset = load_dataset(args.manifest)
    report_path = Path(args.report)
    dump_dir = report_path.parent / f"{report_path.stem}_surfels" if args.dump_surfels else None
    report = calibrate(
        dataset.imu,
        dataset.scans,
        config,
        truth=dataset.truth,
        odometry=dataset.odometry,
        surfel_dump_dir=dump_dir,
    )
    write_report(report_path, report)
    summary = format_summary(report)
    report_path.with_name(f"{report_path.stem}_summary.txt").write_text(summary, encoding="utf-8")
    print(summary, end="")
    return EXIT_OK


def cmd_montecarlo(args: argparse.Namespace) -> int:
    sim_config = load_config(args.config, SimConfig) if args.config else SimConfig()
    calib_config = calib_config_from_args(args, args.calib_config, solver_threads=False)
    master_seed = args.seed if args.seed is not None else sim_config.seed
    stats = run_monte_carlo(args.n, sim_config, calib_config, master_seed, args.threads or 1)
    write_report(args.report, stats)
    rows = write_convergence_csv(convergence_path(args.report), stats)
    logger.info(f"Wrote {rows} convergence rows to {convergence_path(args.report)}")
    print(format_stats(stats), end="")
    return EXIT_OK


def cmd_schema(args: argparse.Namespace) -> int:
    print(dump_json(dump_config_schema()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="licalib", description="LiDAR-IMU extrinsic calibration")
    parser.add_argument("--log-level", help="Root logger level (default from LICALIB_LOG_LEVEL)")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Write a simulated dataset")
    simulate.add_argument("--config", help="Simulation config JSON")
    simulate.add_argument("--out", default=None, help="Output directory")
    simulate.add_argument("--seed", type=int, help="Override the simulation seed")
    simulate.add_argument("--format", choices=[f.value for f in ScanFormat], default=ScanFormat.BINARY.value)
    simulate.set_defaults(handler=cmd_simulate)

    calib = commands.add_parser("calibrate", help="Calibrate a dataset")
    calib.add_argument("--manifest", required=True, help="Dataset manifest.json")
    calib.add_argument("--config", help="Calibration config JSON")
    calib.add_argument("--report", required=True, help="Report JSON to write")
    calib.add_argument("--dump-surfels", action="store_true", help="Write surfels of every round")
    _add_calib_overrides(calib)
    calib.set_defaults(handler=cmd_calibrate)

    mc = commands.add_parser("montecarlo", help="Run seeded simulate-and-calibrate trials")
    mc.add_argument("--config", help="Simulation config JSON")
    mc.add_argument("--calib-config", help="Calibration config JSON")
    mc.add_argument("-n", type=int, required=True, help="Number of trials")
    mc.add_argument("--report", required=True, help="Statistics JSON to write")
    _add_calib_overrides(mc)
    mc.set_defaults(handler=cmd_montecarlo)

    schema = commands.add_parser("schema", help="Print the configuration JSON schemas")
    schema.set_defaults(handler=cmd_schema)
    return parser


def _add_calib_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="Master random seed")
    parser.add_argument("--iterations", type=int, help="Refinement rounds")
    parser.add_argument("--profile", choices=["indoor", "outdoor"], help="Voxel size profile")
    parser.add_argument("--odometry", choices=["oracle", "icp"], help="Initial LiDAR pose source")
    parser.add_argument("--threads", type=int, help="Worker cap")


def main(argv: Optional[List[str]] = None) -> int:
    settings = get_settings()
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.command == "montecarlo" and args.threads is None:
        args.threads = settings.threads
    if args.command == "simulate" and args.out is None:
        args.out = settings.output_dir

    try:
        return args.handler(args)
    except OSError as e:
        logger.error(f"{args.command} failed: {str(e)}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CalibrationError, ValidationError) as e:
        code = exit_code(e)
        logger.error(f"{args.command} failed: {str(e)}")
        print(f"error: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
