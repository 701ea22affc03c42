"""
Quaternion hand-eye solver for the LiDAR-IMU rotation.

Each pair of relative rotations satisfies ``dq_imu ⊗ q_LI = q_LI ⊗ dq_lidar``;
stacking the weighted linear constraints and taking the right singular
vector of the smallest singular value recovers ``q_LI``.
"""

import logging
from typing import List, Sequence

import numpy as np

from src.core.errors import InsufficientDataError, ObservabilityError
from src.splines.quaternion import quat_canonical, quat_log, quat_normalize

from .types import RotPair

logger = logging.getLogger(__name__)

SINGULAR_GAP = 10.0
RELATIVE_RANK_TOL = 1e-8


def left_quat_matrix(q: np.ndarray) -> np.ndarray:
    """Matrix ``[q]_L`` with ``[q]_L p = q ⊗ p``."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ]
    )


def right_quat_matrix(q: np.ndarray) -> np.ndarray:
    """Matrix ``[q]_R`` with ``[q]_R p = p ⊗ q``."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, z, -y],
            [y, -z, w, x],
            [z, y, -x, w],
        ]
    )


def handeye_weight(dq_imu: np.ndarray, dq_lidar: np.ndarray, threshold: float) -> float:
    """Outlier weight from the disagreement of the two rotation angles.

    ``r = |2 (acos(w_imu) - acos(w_lidar))|``; the weight is 1 below
    ``threshold`` and ``threshold / r`` above it.
    """
    w_imu = float(np.clip(quat_canonical(dq_imu)[0], -1.0, 1.0))
    w_lidar = float(np.clip(quat_canonical(dq_lidar)[0], -1.0, 1.0))
    r = abs(2.0 * (np.arccos(w_imu) - np.arccos(w_lidar)))
    if r < threshold:
        return 1.0
    return threshold / r


def make_pairs(
    dq_imu: Sequence[np.ndarray],
    dq_lidar: Sequence[np.ndarray],
    threshold: float,
) -> List[RotPair]:
    """Canonicalize relative rotations and attach their outlier weights."""
    pairs = []
    for a, b in zip(dq_imu, dq_lidar):
        a = quat_canonical(quat_normalize(a))
        b = quat_canonical(quat_normalize(b))
        pairs.append(RotPair(dq_imu=a, dq_lidar=b, weight=handeye_weight(a, b, threshold)))
    down = sum(1 for p in pairs if p.weight < 1.0)
    if down:
        logger.info(f"Down-weighted {down} of {len(pairs)} rotation pairs as outliers")
    return pairs


def _dominant_axis(pairs: Sequence[RotPair]) -> np.ndarray:
    """Mean rotation axis of the LiDAR increments, sign-aligned."""
    vectors = np.array([quat_log(p.dq_lidar) for p in pairs])
    _, _, vt = np.linalg.svd(vectors, full_matrices=False)
    return vt[0]


def solve_handeye(pairs: Sequence[RotPair]) -> np.ndarray:
    """Least-squares extrinsic rotation from weighted relative rotation pairs.

    Args:
        pairs: Relative rotation pairs spanning at least two axes

    Returns:
        Unit quaternion ``q_LI`` with non-negative real part

    Raises:
        InsufficientDataError: Fewer than two pairs
        ObservabilityError: Rotation axes do not span two independent directions
    """
    if len(pairs) < 2:
        raise InsufficientDataError(f"hand-eye needs at least 2 rotation pairs, got {len(pairs)}")
    blocks = [
        p.weight * (left_quat_matrix(p.dq_imu) - right_quat_matrix(p.dq_lidar))
        for p in pairs
    ]
    q_n = np.vstack(blocks)
    _, s, vt = np.linalg.svd(q_n)
    logger.debug(f"Hand-eye singular values: {s}")
    if s[-2] < max(SINGULAR_GAP * s[-1], RELATIVE_RANK_TOL * s[0]):
        axis = _dominant_axis(pairs)
        logger.error(f"Hand-eye system is degenerate, singular values {s}")
        raise ObservabilityError(
            "extrinsic rotation unobservable from the recorded motion",
            [
                f"rotation about axis ({axis[0]:.3f}, {axis[1]:.3f}, {axis[2]:.3f}); "
                f"excite at least two independent rotation axes"
            ],
        )
    q = quat_canonical(quat_normalize(vt[-1]))
    return q
