"""
Whitened Jacobian and normal-equation assembly.

Every residual touches at most four rotation and four position control
points at its own time, plus the four of each at the map reference time
for point-to-plane terms. Blocks with respect to the extrinsics, biases,
gravity and position control points are analytic. Rotation control points
enter through the orientation and body rate of the cumulative spline,
whose local derivatives are taken by central differences and chained with
the analytic derivative of each residual in the tangent space.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse

from src.splines import SplineSO3
from src.splines.basis import blending_weights
from src.splines.curves import (
    evaluate_local_rotation,
    local_rotation_jacobian,
    scatter_local_jacobian,
)
from src.splines.quaternion import (
    quat_conjugate,
    quat_log,
    quat_multiply,
    quat_rotate,
    quat_to_matrix,
)
from src.trajectory import Trajectory, gravity_dof_jacobian, transform_to_map

from .problem import Measurements, Problem, huber_weights
from .state import CalibState, StateLayout

logger = logging.getLogger(__name__)

Triplets = Tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True, eq=False)
class NormalEquations:
    """Gauss-Newton system ``H dx = -g`` at one state.

    Attributes:
        H: ``J^T W J`` as a sparse matrix
        g: ``J^T W r``
        cost: Robust cost at the linearization point
        rows: Number of scalar residuals
    """
    H: sparse.csr_matrix
    g: np.ndarray
    cost: float
    rows: int


def skew_batch(v: np.ndarray) -> np.ndarray:
    """Stack of cross-product matrices, ``(N, 3) -> (N, 3, 3)``."""
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def rotation_jacobians(
    rot: SplineSO3, t: np.ndarray, step: float, with_rate: bool = True
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Orientation and body rate with their derivatives w.r.t. local control points.

    Returns:
        ``(i, u, q, omega, J_phi, J_omega)``; ``J_phi`` maps right increments
        of the four local control points to the right tangent of ``q``,
        shape ``(N, 3, 4, 3)``
    """
    i, u, local = rot.local_ctrl(t)
    dt = rot.grid.dt
    q, omega = evaluate_local_rotation(local, u, dt)
    q_inv = quat_conjugate(q)

    def tangent(stack: np.ndarray) -> np.ndarray:
        q_s, w_s = evaluate_local_rotation(stack, u, dt)
        phi = quat_log(quat_multiply(q_inv, q_s))
        return np.concatenate([phi, w_s], axis=1) if with_rate else phi

    jac = local_rotation_jacobian(tangent, local, step)
    return i, u, q, omega, jac[:, :3], (jac[:, 3:] if with_rate else None)


def _dense_block(block: np.ndarray, row_offset: int, col_start: int) -> Triplets:
    n, m, c = block.shape
    rows = row_offset + np.repeat(np.arange(n * m), c)
    cols = col_start + np.tile(np.arange(c), n * m)
    return rows, cols, block.reshape(-1)


def _imu_triplets(
    state: CalibState,
    traj: Trajectory,
    meas: Measurements,
    layout: StateLayout,
    step: float,
) -> Tuple[List[Triplets], np.ndarray, np.ndarray]:
    m = meas.n_imu
    i, u, q, omega, j_phi, j_omega = rotation_jacobians(traj.rot, meas.imu_t, step)
    assert j_omega is not None
    r_t = np.transpose(quat_to_matrix(q), (0, 2, 1))
    specific = np.einsum("nij,nj->ni", r_t, traj.pos.acceleration(meas.imu_t) - traj.gravity)
    ra = meas.accel - specific - state.bias_a
    rg = meas.gyro - omega - state.bias_g

    parts: List[Triplets] = []
    minus_eye = np.broadcast_to(-np.eye(3), (m, 3, 3))

    # accelerometer rows
    d_phi = -skew_batch(specific)
    parts.append(scatter_local_jacobian(
        np.einsum("nrb,nbsa->nrsa", d_phi, j_phi), i, 3, layout.rot, fixed_first=True
    ))
    w_dd = blending_weights(u, traj.grid.dt, 2)
    pos_block = -w_dd[:, None, :, None] * r_t[:, :, None, :]
    parts.append(scatter_local_jacobian(pos_block, i, 3, layout.pos, fixed_first=True))
    parts.append(_dense_block(minus_eye, 0, layout.bias_a))
    if layout.estimate_gravity:
        g_jac = np.einsum("nij,jk->nik", r_t, gravity_dof_jacobian(state.gravity_dof))
        parts.append(_dense_block(g_jac, 0, layout.gravity))

    # gyroscope rows
    parts.append(scatter_local_jacobian(-j_omega, i, 3, layout.rot, fixed_first=True, row_offset=3 * m))
    parts.append(_dense_block(minus_eye, 3 * m, layout.bias_g))
    return parts, ra, rg


def _lidar_triplets(
    state: CalibState,
    traj: Trajectory,
    meas: Measurements,
    t_map: float,
    layout: StateLayout,
    step: float,
    row_offset: int,
) -> Tuple[List[Triplets], np.ndarray]:
    n = meas.n_lidar
    dt = traj.grid.dt
    q_LI, p_LI = state.ext.rotation, state.ext.translation
    i_j, u_j, q_j, _, phi_j, _ = rotation_jacobians(traj.rot, meas.times, step, with_rate=False)
    i_0, u_0, q_0, _, phi_0, _ = rotation_jacobians(traj.rot, np.array([t_map]), step, with_rate=False)
    p_j = traj.pos.position(meas.times)
    p_0 = traj.pos.position(t_map)
    q_0 = q_0[0]

    points = meas.points
    normals = meas.normals
    x = transform_to_map(q_j, p_j, q_0, p_0, q_LI, p_LI, points)
    rl = np.einsum("ij,ij->i", x, normals) + meas.offsets

    y = quat_rotate(q_LI, points) + p_LI
    z = quat_rotate(q_LI, x) + p_LI
    a = quat_rotate(q_LI, normals)
    b = quat_rotate(q_0, a)
    c = quat_rotate(quat_conjugate(q_j), b)
    e = quat_rotate(quat_conjugate(q_LI), c)

    parts: List[Triplets] = []
    ext_rot = np.cross(normals, x) - np.cross(e, points)
    parts.append(_dense_block(ext_rot[:, None, :], row_offset, layout.ext_rot))
    parts.append(_dense_block((c - a)[:, None, :], row_offset, layout.ext_trans))

    row_j = np.cross(y, c)
    block_j = np.einsum("nb,nbsa->nsa", row_j, phi_j)[:, None]
    parts.append(scatter_local_jacobian(block_j, i_j, 3, layout.rot, fixed_first=True, row_offset=row_offset))
    row_0 = np.cross(a, z)
    block_0 = np.einsum("nb,bsa->nsa", row_0, phi_0[0])[:, None]
    seg_0 = np.full(n, i_0[0], dtype=np.int64)
    parts.append(scatter_local_jacobian(block_0, seg_0, 3, layout.rot, fixed_first=True, row_offset=row_offset))

    w_j = blending_weights(u_j, dt, 0)
    w_0 = blending_weights(u_0, dt, 0)[0]
    pos_j = (w_j[:, :, None] * b[:, None, :])[:, None]
    pos_0 = (-w_0[None, :, None] * b[:, None, :])[:, None]
    parts.append(scatter_local_jacobian(pos_j, i_j, 3, layout.pos, fixed_first=True, row_offset=row_offset))
    parts.append(scatter_local_jacobian(pos_0, seg_0, 3, layout.pos, fixed_first=True, row_offset=row_offset))
    return parts, rl


def linearize(
    problem: Problem,
    state: CalibState,
    meas: Measurements,
    layout: StateLayout,
    step: float,
    traj: Optional[Trajectory] = None,
) -> Tuple[sparse.csr_matrix, np.ndarray, float]:
    """Whitened Jacobian, whitened residual and robust cost of one measurement chunk."""
    traj = traj or state.to_trajectory()
    noise = problem.noise
    m = meas.n_imu
    parts: List[Triplets] = []
    ra = np.zeros((0, 3))
    rg = np.zeros((0, 3))
    rl = np.zeros(0)
    if m:
        imu_parts, ra, rg = _imu_triplets(state, traj, meas, layout, step)
        parts.extend(imu_parts)
    if meas.n_lidar:
        lidar_parts, rl = _lidar_triplets(state, traj, meas, problem.map_time, layout, step, 6 * m)
        parts.extend(lidar_parts)

    lidar_weight = np.ones(len(rl))
    if problem.huber_delta is not None:
        lidar_weight = huber_weights(rl, problem.huber_delta)
    scale = np.concatenate([
        np.full(3 * m, 1.0 / noise.sigma_accel),
        np.full(3 * m, 1.0 / noise.sigma_gyro),
        np.sqrt(lidar_weight) / noise.sigma_lidar,
    ])
    residual = np.concatenate([ra.reshape(-1), rg.reshape(-1), rl]) * scale

    if parts:
        rows = np.concatenate([p[0] for p in parts])
        cols = np.concatenate([p[1] for p in parts])
        vals = np.concatenate([p[2] for p in parts]) * scale[rows]
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    jac = sparse.coo_matrix((vals, (rows, cols)), shape=(meas.n_rows, layout.size)).tocsr()
    return jac, residual, problem.cost_from_residuals(ra, rg, rl)


def build_jacobian(
    problem: Problem,
    state: CalibState,
    layout: Optional[StateLayout] = None,
    fd_step: float = 1e-6,
) -> Tuple[sparse.csr_matrix, np.ndarray]:
    """Whitened Jacobian and residual vector of the whole problem.

    Rows are ordered accelerometer (3 per sample), gyroscope (3 per sample),
    then one per correspondence.
    """
    layout = layout or StateLayout(problem.grid.n)
    jac, residual, _ = linearize(problem, state, problem.measurements, layout, fd_step)
    return jac, residual


def build_normal_equations(
    problem: Problem,
    state: CalibState,
    layout: Optional[StateLayout] = None,
    fd_step: float = 1e-6,
    threads: int = 1,
) -> NormalEquations:
    """Accumulate ``J^T W J`` and ``J^T W r`` over measurement chunks.

    Chunks are evaluated on a thread pool against one trajectory snapshot
    and summed in chunk order, so the result does not depend on ``threads``
    scheduling.
    """
    layout = layout or StateLayout(problem.grid.n)
    traj = state.to_trajectory()
    chunks = problem.measurements.split(threads)

    def work(meas: Measurements) -> Tuple[sparse.csr_matrix, np.ndarray, float]:
        jac, residual, cost = linearize(problem, state, meas, layout, fd_step, traj)
        return (jac.T @ jac).tocsr(), jac.T @ residual, cost

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(chunk) for chunk in chunks]

    hessian = results[0][0]
    gradient = results[0][1]
    cost = results[0][2]
    for h, g, c in results[1:]:
        hessian = hessian + h
        gradient = gradient + g
        cost += c
    return NormalEquations(
        H=hessian.tocsr(),
        g=np.asarray(gradient).reshape(-1),
        cost=float(cost),
        rows=problem.measurements.n_rows,
    )
