"""
Uniform cubic B-spline curves on R^3 and on SO(3).

Both curve types are immutable: control point arrays are copied and made
read-only at construction, and updates produce new instances through
``with_ctrl``. Every evaluator accepts a scalar time or an array of times.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np
from scipy import sparse

from .basis import ORDER, KnotGrid, blending_weights, cumulative_weights
from .quaternion import (
    quat_conjugate,
    quat_exp,
    quat_log,
    quat_multiply,
    quat_rotate,
)

logger = logging.getLogger(__name__)

TimeLike = Union[float, np.ndarray]

UNIT_TOLERANCE = 1e-6


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


def _shape_like(t: TimeLike, values: np.ndarray) -> np.ndarray:
    """Drop the leading axis when the caller passed a scalar time."""
    return values[0] if np.ndim(t) == 0 else values


def _segment_indices(i: np.ndarray) -> np.ndarray:
    return i[:, None] + np.arange(ORDER)[None, :]


@dataclass(frozen=True, eq=False)
class SplineR3:
    """Cubic B-spline in R^3.

    Attributes:
        grid: Knot grid
        ctrl: Control points, shape ``(grid.n, 3)``, meters
    """
    grid: KnotGrid
    ctrl: np.ndarray

    def __post_init__(self) -> None:
        ctrl = np.asarray(self.ctrl, dtype=float)
        if ctrl.shape != (self.grid.n, 3):
            raise ValueError(
                f"expected control points of shape ({self.grid.n}, 3), got {ctrl.shape}"
            )
        object.__setattr__(self, "ctrl", _frozen(ctrl))

    def with_ctrl(self, ctrl: np.ndarray) -> "SplineR3":
        return SplineR3(self.grid, ctrl)

    def _evaluate(self, t: TimeLike, derivative: int) -> np.ndarray:
        i, u = self.grid.locate(t)
        w = blending_weights(u, self.grid.dt, derivative)
        local = self.ctrl[_segment_indices(i)]
        return _shape_like(t, np.einsum("nj,njk->nk", w, local))

    def position(self, t: TimeLike) -> np.ndarray:
        return self._evaluate(t, 0)

    def velocity(self, t: TimeLike) -> np.ndarray:
        return self._evaluate(t, 1)

    def acceleration(self, t: TimeLike) -> np.ndarray:
        return self._evaluate(t, 2)

    def position_cumulative(self, t: TimeLike) -> np.ndarray:
        """Position through the cumulative form ``p_i + sum_j lambda_j (p_{i+j} - p_{i+j-1})``."""
        i, u = self.grid.locate(t)
        lam = cumulative_weights(u, self.grid.dt)
        local = self.ctrl[_segment_indices(i)]
        diffs = np.diff(local, axis=1)
        value = local[:, 0] + np.einsum("nj,njk->nk", lam[:, 1:], diffs)
        return _shape_like(t, value)

    def basis_matrix(self, t: np.ndarray, derivative: int = 0) -> sparse.csr_matrix:
        """Sparse ``(N, n)`` matrix mapping control points to values at ``t``."""
        t = np.atleast_1d(t)
        i, u = self.grid.locate(t)
        return spline_basis_matrix(self.grid, i, u, derivative)


def spline_basis_matrix(
    grid: KnotGrid, i: np.ndarray, u: np.ndarray, derivative: int = 0
) -> sparse.csr_matrix:
    """Sparse blending matrix for precomputed segment indices."""
    w = blending_weights(u, grid.dt, derivative)
    rows = np.repeat(np.arange(len(i)), ORDER)
    cols = _segment_indices(i).ravel()
    return sparse.csr_matrix((w.ravel(), (rows, cols)), shape=(len(i), grid.n))


def condition_signs(ctrl: np.ndarray) -> np.ndarray:
    """Flip control quaternions so neighbours have a non-negative dot product."""
    dots = np.einsum("ij,ij->i", ctrl[:-1], ctrl[1:])
    steps = np.where(dots < 0.0, -1.0, 1.0)
    signs = np.concatenate([[1.0], np.cumprod(steps)])
    return ctrl * signs[:, None]


def evaluate_local_rotation(
    local: np.ndarray, u: np.ndarray, dt: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Orientation and body angular velocity from per-sample control points.

    Args:
        local: Sign-conditioned control quaternions, shape ``(N, 4, 4)``
        u: Normalized segment times, shape ``(N,)``
        dt: Knot spacing

    Returns:
        ``(q, omega)`` with shapes ``(N, 4)`` and ``(N, 3)``
    """
    lam = cumulative_weights(u, dt)
    lam_dot = cumulative_weights(u, dt, 1)
    d = quat_log(quat_multiply(quat_conjugate(local[:, :-1]), local[:, 1:]))
    q = local[:, 0]
    omega = np.zeros((len(u), 3))
    for j in range(1, ORDER):
        a = quat_exp(lam[:, j, None] * d[:, j - 1])
        q = quat_multiply(q, a)
        omega = quat_rotate(quat_conjugate(a), omega) + lam_dot[:, j, None] * d[:, j - 1]
    return q, omega


def local_rotation_jacobian(
    fn: Callable[[np.ndarray], np.ndarray], local: np.ndarray, step: float
) -> np.ndarray:
    """Central-difference derivative w.r.t. right increments of local control points.

    ``fn`` maps a ``(N, 4, 4)`` control stack to residuals ``(N, m)``. The
    result has shape ``(N, m, 4, 3)``: slot ``j`` is perturbed as
    ``q_j ⊗ exp(±h e_a)``.
    """
    n = local.shape[0]
    columns = []
    for j in range(ORDER):
        for a in range(3):
            delta = np.zeros(3)
            delta[a] = step
            plus = local.copy()
            minus = local.copy()
            plus[:, j] = quat_multiply(local[:, j], quat_exp(delta))
            minus[:, j] = quat_multiply(local[:, j], quat_exp(-delta))
            columns.append((fn(plus) - fn(minus)) / (2.0 * step))
    stacked = np.stack(columns, axis=-1)
    return stacked.reshape(n, -1, ORDER, 3)


def scatter_local_jacobian(
    jac: np.ndarray,
    segment: np.ndarray,
    dof: int = 3,
    col_offset: int = 0,
    fixed_first: bool = False,
    row_offset: int = 0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """COO triplets placing per-sample control-point blocks into a global Jacobian.

    Args:
        jac: Blocks of shape ``(N, m, 4, dof)``
        segment: Segment index of each sample, shape ``(N,)``
        dof: Parameters per control point
        col_offset: First column of control point 0 (or 1 when ``fixed_first``)
        fixed_first: Drop control point 0 from the parameter vector
        row_offset: First row of the block

    Returns:
        ``(rows, cols, values)`` ready for a ``scipy.sparse.coo_matrix``
    """
    n, m = jac.shape[:2]
    ctrl = _segment_indices(segment)
    rows = row_offset + np.arange(n * m).reshape(n, m, 1, 1)
    if fixed_first:
        base = col_offset + dof * (ctrl - 1)
    else:
        base = col_offset + dof * ctrl
    cols = base[:, None, :, None] + np.arange(dof)[None, None, None, :]
    keep = np.broadcast_to((ctrl >= 1)[:, None, :, None] if fixed_first else True, jac.shape)
    rows = np.broadcast_to(rows, jac.shape)
    cols = np.broadcast_to(cols, jac.shape)
    return rows[keep], cols[keep], jac[keep]


@dataclass(frozen=True, eq=False)
class SplineSO3:
    """Cumulative cubic B-spline on unit quaternions.

    Control points are normalized and sign-conditioned at construction so
    adjacent relative rotations stay on the short arc.

    Attributes:
        grid: Knot grid
        ctrl: Unit quaternions ``(w, x, y, z)``, shape ``(grid.n, 4)``
    """
    grid: KnotGrid
    ctrl: np.ndarray

    def __post_init__(self) -> None:
        ctrl = np.asarray(self.ctrl, dtype=float)
        if ctrl.shape != (self.grid.n, 4):
            raise ValueError(
                f"expected control points of shape ({self.grid.n}, 4), got {ctrl.shape}"
            )
        norms = np.linalg.norm(ctrl, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
            worst = int(np.argmax(np.abs(norms - 1.0)))
            logger.error(f"Rotation control point {worst} has norm {norms[worst]:.9f}")
            raise ValueError("rotation control points must be unit quaternions")
        ctrl = condition_signs(ctrl / norms[:, None])
        object.__setattr__(self, "ctrl", _frozen(ctrl))

    def with_ctrl(self, ctrl: np.ndarray) -> "SplineSO3":
        return SplineSO3(self.grid, ctrl)

    def local_ctrl(self, t: TimeLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Segment indices, normalized times and ``(N, 4, 4)`` control stacks."""
        i, u = self.grid.locate(t)
        return i, u, self.ctrl[_segment_indices(i)]

    def evaluate(self, t: TimeLike) -> Tuple[np.ndarray, np.ndarray]:
        """Orientation and body angular velocity at ``t``."""
        _, u, local = self.local_ctrl(t)
        q, omega = evaluate_local_rotation(local, u, self.grid.dt)
        return _shape_like(t, q), _shape_like(t, omega)

    def orientation(self, t: TimeLike) -> np.ndarray:
        return self.evaluate(t)[0]

    def angular_velocity_body(self, t: TimeLike) -> np.ndarray:
        return self.evaluate(t)[1]


def eval_position(spline: SplineR3, t: TimeLike) -> np.ndarray:
    """Position at ``t`` (meters)."""
    return spline.position(t)


def eval_velocity(spline: SplineR3, t: TimeLike) -> np.ndarray:
    """Velocity at ``t`` (m/s)."""
    return spline.velocity(t)


def eval_acceleration(spline: SplineR3, t: TimeLike) -> np.ndarray:
    """Acceleration at ``t`` (m/s^2)."""
    return spline.acceleration(t)


def eval_orientation(spline: SplineSO3, t: TimeLike) -> np.ndarray:
    """Unit quaternion at ``t``."""
    return spline.orientation(t)


def eval_angular_velocity_body(spline: SplineSO3, t: TimeLike) -> np.ndarray:
    """Body-frame angular velocity ``vee(R^T dR/dt)`` at ``t`` (rad/s)."""
    return spline.angular_velocity_body(t)
