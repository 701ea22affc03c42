"""
Least-squares spline initialization from discrete poses.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from scipy.spatial.transform import Rotation, Slerp

from src.config import GRAVITY_MAGNITUDE
from src.core.errors import DomainError, InsufficientDataError
from src.splines import KnotGrid, SplineR3, SplineSO3
from src.splines.basis import ORDER
from src.splines.curves import (
    evaluate_local_rotation,
    local_rotation_jacobian,
    scatter_local_jacobian,
    spline_basis_matrix,
)
from src.splines.quaternion import quat_canonical, quat_conjugate, quat_exp, quat_log, quat_multiply

from .trajectory import Trajectory, wxyz_to_xyzw, xyzw_to_wxyz

logger = logging.getLogger(__name__)

PoseTuple = Tuple[float, np.ndarray, np.ndarray]

MIN_POSES = 4


def _difference_operator(n: int, order: int) -> sparse.csr_matrix:
    """Finite-difference operator of the given order on ``n`` control points."""
    d = sparse.identity(n, format="csr")
    for _ in range(order):
        d = (d[1:] - d[:-1]).tocsr()
    return d


def fit_positions(
    grid: KnotGrid,
    times: np.ndarray,
    positions: np.ndarray,
    smoothing: float = 1e-10,
) -> SplineR3:
    """Position spline minimizing squared error plus a tiny curvature penalty.

    The penalty on second differences of the control points only fixes
    control points the samples leave unconstrained.
    """
    i, u = grid.locate(times)
    basis = spline_basis_matrix(grid, i, u)
    d2 = _difference_operator(grid.n, 2)
    lhs = (basis.T @ basis + smoothing * (d2.T @ d2)).tocsc()
    rhs = basis.T @ positions
    ctrl = np.column_stack([spsolve(lhs, rhs[:, k]) for k in range(3)])
    return SplineR3(grid, ctrl)


def initial_rotation_ctrl(grid: KnotGrid, times: np.ndarray, quats: np.ndarray) -> np.ndarray:
    """Control quaternions interpolated from poses at their peak-weight times."""
    slerp = Slerp(times, Rotation.from_quat(wxyz_to_xyzw(quats)))
    knots = np.clip(grid.knot_time(np.arange(grid.n)), times[0], times[-1])
    return xyzw_to_wxyz(slerp(knots).as_quat())


def refine_rotations(
    spline: SplineSO3,
    times: np.ndarray,
    targets: np.ndarray,
    max_iters: int = 20,
    damping: float = 1e-9,
    fd_step: float = 1e-6,
) -> SplineSO3:
    """Gauss-Newton on ``log(target^-1 ⊗ q(t))`` over all control points."""
    grid = spline.grid
    i, u = grid.locate(times)
    cols = (i[:, None] + np.arange(ORDER)[None, :])
    target_inv = quat_conjugate(targets)

    def residual(local: np.ndarray) -> np.ndarray:
        q, _ = evaluate_local_rotation(local, u, grid.dt)
        return quat_log(quat_canonical(quat_multiply(target_inv, q)))

    cost = np.inf
    for iteration in range(max_iters):
        local = spline.ctrl[cols]
        r = residual(local)
        cost = float(np.sum(r * r))
        jac = local_rotation_jacobian(residual, local, fd_step)
        rows, col_idx, vals = scatter_local_jacobian(jac, i)
        J = sparse.csr_matrix((vals, (rows, col_idx)), shape=(3 * len(u), 3 * grid.n))
        H = (J.T @ J + damping * sparse.identity(3 * grid.n)).tocsc()
        step = spsolve(H, -(J.T @ r.ravel()))
        delta = step.reshape(grid.n, 3)
        candidate = spline.with_ctrl(quat_multiply(spline.ctrl, quat_exp(delta)))
        r_new = residual(candidate.ctrl[cols])
        new_cost = float(np.sum(r_new * r_new))
        if new_cost > cost:
            logger.debug(f"Rotation fit stopped at iteration {iteration}: cost {cost:.3e}")
            break
        spline = candidate
        cost = new_cost
        if np.max(np.abs(delta)) < 1e-12:
            break
    logger.debug(f"Rotation fit residual {np.sqrt(cost / max(len(u), 1)):.3e} rad")
    return spline


def fit_to_poses(
    poses: Sequence[PoseTuple],
    grid: KnotGrid,
    gravity: Optional[np.ndarray] = None,
    smoothing: float = 1e-10,
) -> Trajectory:
    """Fit a trajectory to discrete timestamped poses.

    Args:
        poses: ``(t, unit quaternion (w, x, y, z), position)`` triples
        grid: Knot grid of the resulting splines
        gravity: Gravity of the result, defaults to ``(0, 0, -9.81)``
        smoothing: Weight of the control-point curvature penalty

    Returns:
        Trajectory whose control points minimize summed squared position
        error and squared log-map orientation error at the pose times

    Raises:
        InsufficientDataError: Fewer than four poses
        ValueError: Timestamps not strictly increasing
        DomainError: A timestamp lies outside the grid domain
    """
    if len(poses) < MIN_POSES:
        raise InsufficientDataError(
            f"need at least {MIN_POSES} poses to fit a trajectory, got {len(poses)}"
        )
    times = np.array([p[0] for p in poses], dtype=float)
    quats = np.array([np.asarray(p[1], dtype=float) for p in poses])
    positions = np.array([np.asarray(p[2], dtype=float) for p in poses])
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("pose timestamps must be strictly increasing")
    outside = ~grid.contains(times)
    if np.any(outside):
        raise DomainError(times[outside][0], grid.t0, grid.t_end)

    pos = fit_positions(grid, times, positions, smoothing)
    rot = SplineSO3(grid, initial_rotation_ctrl(grid, times, quats))
    rot = refine_rotations(rot, times, quats)
    if gravity is None:
        gravity = np.array([0.0, 0.0, -GRAVITY_MAGNITUDE])
    return Trajectory(rot=rot, pos=pos, gravity=gravity)
