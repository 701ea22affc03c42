"""Pose sequence CSV export and import."""

import csv
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from src.core.errors import DatasetError

from .types import ScanPose

POSE_HEADER = ["t", "qw", "qx", "qy", "qz", "px", "py", "pz"]


def write_poses_csv(path: Union[str, Path], poses: Sequence[ScanPose]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(POSE_HEADER)
        for pose in poses:
            writer.writerow([repr(float(v)) for v in (pose.t, *pose.q, *pose.p)])


def read_poses_csv(path: Union[str, Path]) -> List[ScanPose]:
    """Read poses written by :func:`write_poses_csv`.

    Raises:
        DatasetError: On a wrong header, malformed row or non-increasing time
    """
    path = Path(path)
    poses: List[ScanPose] = []
    with path.open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != POSE_HEADER:
            raise DatasetError(f"expected header {','.join(POSE_HEADER)}", str(path), 1)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                values = np.array([float(v) for v in row], dtype=float)
            except ValueError as e:
                raise DatasetError(f"malformed row: {e}", str(path), line) from e
            if len(values) != len(POSE_HEADER) or not np.all(np.isfinite(values)):
                raise DatasetError("expected 8 finite values", str(path), line)
            if np.linalg.norm(values[1:5]) == 0.0:
                raise DatasetError("zero quaternion", str(path), line)
            if poses and values[0] <= poses[-1].t:
                raise DatasetError("timestamps must be strictly increasing", str(path), line)
            poses.append(ScanPose(t=values[0], q=values[1:5], p=values[5:8]))
    return poses
