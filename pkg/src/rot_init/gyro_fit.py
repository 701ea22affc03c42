"""
Rotation spline fitted to raw gyroscope data.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from scipy.spatial.transform import Rotation, Slerp

from src.core.errors import InsufficientDataError
from src.splines import KnotGrid, SplineSO3
from src.splines.basis import ORDER
from src.splines.curves import (
    evaluate_local_rotation,
    local_rotation_jacobian,
    scatter_local_jacobian,
)
from src.splines.quaternion import (
    quat_canonical,
    quat_conjugate,
    quat_exp,
    quat_identity,
    quat_log,
    quat_multiply,
)
from src.trajectory.trajectory import wxyz_to_xyzw, xyzw_to_wxyz

from .types import ImuSample, stack_imu

logger = logging.getLogger(__name__)

MIN_SAMPLES_PER_SEGMENT = 2


def _chain(dq: np.ndarray) -> np.ndarray:
    q = np.empty((len(dq) + 1, 4))
    q[0] = quat_identity()
    for k in range(len(dq)):
        q[k + 1] = quat_multiply(q[k], dq[k])
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def integrate_gyro(t: np.ndarray, gyro: np.ndarray) -> np.ndarray:
    """Orientation at every sample by zero-order-hold integration from identity."""
    return _chain(quat_exp(gyro[:-1] * np.diff(t)[:, None]))


def orientation_at(t: np.ndarray, gyro: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Orientation at arbitrary times by trapezoidal gyro integration.

    The orientation is the identity at ``t[0]``; query times between two
    samples take a partial step with that interval's mean rate.
    """
    rate = 0.5 * (gyro[:-1] + gyro[1:])
    steps = np.diff(t)
    q = _chain(quat_exp(rate * steps[:, None]))
    query = np.asarray(query, dtype=float)
    idx = np.clip(np.searchsorted(t, query, side="right") - 1, 0, len(t) - 2)
    partial = quat_exp(rate[idx] * (query - t[idx])[:, None])
    return quat_multiply(q[idx], partial)


def estimate_gyro_bias(
    samples: Sequence[ImuSample],
    scan_times: np.ndarray,
    scan_rotations: np.ndarray,
    q_LI: np.ndarray,
    max_iters: int = 10,
    fd_step: float = 1e-6,
) -> Tuple[np.ndarray, np.ndarray]:
    """Constant gyroscope bias from the drift against LiDAR rotations.

    The gyro alone cannot tell a constant bias from true rotation, so the
    debiased gyro is integrated and compared with the LiDAR rotation since
    the first scan, seen in the IMU frame through ``q_LI``. Bias and a
    correction of ``q_LI`` are solved jointly by Gauss-Newton.

    Args:
        samples: Raw IMU samples, time ordered
        scan_times: Reference time of every scan with a pose
        scan_rotations: LiDAR orientation of every scan, ``(K, 4)``
        q_LI: Extrinsic rotation estimate
        max_iters: Gauss-Newton iterations
        fd_step: Finite-difference step

    Returns:
        Gyro bias (rad/s) and the refined extrinsic rotation

    Raises:
        InsufficientDataError: Fewer than three scans inside the IMU span
    """
    t, gyro, _ = stack_imu(samples)
    times = np.asarray(scan_times, dtype=float)
    inside = (times >= t[0]) & (times <= t[-1])
    times = times[inside]
    rotations = np.asarray(scan_rotations, dtype=float)[inside]
    if len(times) < 3:
        raise InsufficientDataError(f"{len(times)} scans inside the IMU span; need at least 3")
    lidar = quat_multiply(quat_conjugate(rotations[0])[None, :], rotations[1:])

    def imu_relative(bias: np.ndarray) -> np.ndarray:
        q = orientation_at(t, gyro - bias, times)
        return quat_multiply(quat_conjugate(q[0])[None, :], q[1:])

    def residual(dq_imu: np.ndarray, q: np.ndarray) -> np.ndarray:
        mapped = quat_multiply(quat_multiply(q[None, :], lidar), quat_conjugate(q)[None, :])
        return quat_log(quat_canonical(quat_multiply(quat_conjugate(mapped), dq_imu))).ravel()

    bias = np.zeros(3)
    q = np.asarray(q_LI, dtype=float)
    dq_imu = imu_relative(bias)
    r = residual(dq_imu, q)
    cost = float(r @ r)
    for iteration in range(max_iters):
        J = np.empty((len(r), 6))
        for k in range(3):
            step = np.zeros(3)
            step[k] = fd_step
            J[:, k] = (residual(imu_relative(bias + step), q) - r) / fd_step
            J[:, 3 + k] = (residual(dq_imu, quat_multiply(q, quat_exp(step))) - r) / fd_step
        delta = np.linalg.lstsq(J, -r, rcond=None)[0]
        new_bias = bias + delta[:3]
        new_q = quat_multiply(q, quat_exp(delta[3:]))
        new_dq = imu_relative(new_bias)
        r_new = residual(new_dq, new_q)
        new_cost = float(r_new @ r_new)
        if new_cost > cost:
            break
        bias, q, dq_imu, r, cost = new_bias, new_q, new_dq, r_new, new_cost
        logger.debug(f"Gyro bias iteration {iteration}: cost {cost:.6e}")
        if np.max(np.abs(delta)) < 1e-10:
            break

    logger.info(
        f"Estimated gyro bias {np.array2string(bias, precision=5)} rad/s from {len(times)} scans"
    )
    return bias, quat_canonical(q)


def fit_gyro_spline(
    samples: Sequence[ImuSample],
    grid: KnotGrid,
    max_iters: int = 20,
    fd_step: float = 1e-6,
    bias: Optional[np.ndarray] = None,
) -> SplineSO3:
    """Rotation spline whose body rate best matches the gyroscope.

    The first control point is held at identity; the remaining ones are
    initialized from integrated gyro data and refined by damped
    Gauss-Newton on ``sum |omega_m - b - omega(t)|^2``.

    Args:
        samples: Raw IMU samples, time ordered
        grid: Knot grid of the spline
        max_iters: Gauss-Newton iterations
        fd_step: Finite-difference step for control point increments
        bias: Gyro bias subtracted from every sample (rad/s), zero by default

    Returns:
        Fitted rotation spline

    Raises:
        InsufficientDataError: Fewer than two samples per knot interval on average
    """
    t, gyro, _ = stack_imu(samples)
    inside = grid.contains(t)
    t, gyro = t[inside], gyro[inside]
    if bias is not None:
        gyro = gyro - np.asarray(bias, dtype=float)
    if len(t) < MIN_SAMPLES_PER_SEGMENT * grid.segments:
        raise InsufficientDataError(
            f"{len(t)} gyro samples for {grid.segments} knot intervals; "
            f"need at least {MIN_SAMPLES_PER_SEGMENT} per interval"
        )

    integrated = integrate_gyro(t, gyro)
    slerp = Slerp(t, Rotation.from_quat(wxyz_to_xyzw(integrated)))
    knots = np.clip(grid.knot_time(np.arange(grid.n)), t[0], t[-1])
    ctrl = xyzw_to_wxyz(slerp(knots).as_quat())
    ctrl = quat_multiply(quat_conjugate(ctrl[0])[None, :], ctrl)
    spline = SplineSO3(grid, ctrl)

    i, u = grid.locate(t)
    cols = i[:, None] + np.arange(ORDER)[None, :]
    n_params = 3 * (grid.n - 1)

    def residual(local: np.ndarray) -> np.ndarray:
        return gyro - evaluate_local_rotation(local, u, grid.dt)[1]

    mu = 1e-6
    r = residual(spline.ctrl[cols])
    cost = float(np.sum(r * r))
    for iteration in range(max_iters):
        jac = local_rotation_jacobian(residual, spline.ctrl[cols], fd_step)
        rows, col_idx, vals = scatter_local_jacobian(jac, i, fixed_first=True)
        J = sparse.csr_matrix((vals, (rows, col_idx)), shape=(3 * len(t), n_params))
        H = (J.T @ J).tocsc()
        g = J.T @ r.ravel()
        while True:
            damped = H + sparse.diags(mu * H.diagonal() + 1e-12)
            delta = spsolve(damped.tocsc(), -g).reshape(grid.n - 1, 3)
            new_ctrl = spline.ctrl.copy()
            new_ctrl[1:] = quat_multiply(spline.ctrl[1:], quat_exp(delta))
            candidate = spline.with_ctrl(new_ctrl)
            r_new = residual(candidate.ctrl[cols])
            new_cost = float(np.sum(r_new * r_new))
            if new_cost <= cost or mu > 1e8:
                break
            mu *= 10.0
        if new_cost > cost:
            break
        converged = cost - new_cost <= 1e-12 * max(cost, 1e-30) or np.max(np.abs(delta)) < 1e-12
        spline, r, cost = candidate, r_new, new_cost
        mu = max(mu / 10.0, 1e-12)
        logger.debug(f"Gyro fit iteration {iteration}: cost {cost:.6e}")
        if converged:
            break

    rms = np.sqrt(cost / (3 * len(t)))
    logger.info(f"Fitted gyro spline with {grid.n} control points, residual RMS {rms:.4e} rad/s")
    return spline


def relative_rotation(spline: SplineSO3, t_a: float, t_b: float) -> np.ndarray:
    """Rotation of the body at ``t_b`` relative to ``t_a``, ``q(t_a)^-1 ⊗ q(t_b)``."""
    q = spline.orientation(np.array([t_a, t_b], dtype=float))
    return quat_multiply(quat_conjugate(q[0]), q[1])
