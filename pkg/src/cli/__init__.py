"""Command-line interface and dataset file formats."""

from .io import (
    DatasetManifest,
    LoadedDataset,
    ScanFormat,
    ScanSidecar,
    TimeUnit,
    format_stats,
    format_summary,
    load_dataset,
    read_imu_csv,
    read_scan,
    write_dataset,
    write_imu_csv,
    write_scan,
)
from .main import build_parser, exit_code, main

__all__ = [
    "DatasetManifest",
    "LoadedDataset",
    "ScanFormat",
    "ScanSidecar",
    "TimeUnit",
    "build_parser",
    "exit_code",
    "format_stats",
    "format_summary",
    "load_dataset",
    "main",
    "read_imu_csv",
    "read_scan",
    "write_dataset",
    "write_imu_csv",
    "write_scan",
]
