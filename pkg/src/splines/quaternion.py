"""
Unit quaternion algebra on numpy arrays.

Quaternions are Hamilton quaternions stored as ``(w, x, y, z)`` in the last
axis of an array, so every function here accepts a single quaternion of
shape ``(4,)`` or a stack of shape ``(..., 4)``. ``R(q)`` maps child-frame
vectors into the parent frame.
"""

import numpy as np

SMALL_ANGLE = 1e-8


def quat_identity(shape: tuple = ()) -> np.ndarray:
    """Identity quaternion(s) with the given leading shape."""
    q = np.zeros(shape + (4,))
    q[..., 0] = 1.0
    return q


def quat_multiply(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product ``p ⊗ q`` with broadcasting over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pw, px, py, pz = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    qw, qx, qy, qz = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    """Conjugate, which is the inverse for unit quaternions."""
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Scale to unit norm."""
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Flip sign so that the real part is non-negative."""
    q = np.asarray(q, dtype=float)
    sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
    return q * sign


def quat_exp(v: np.ndarray) -> np.ndarray:
    """Map a rotation vector to a unit quaternion.

    ``exp(v) = (cos(|v|/2), sin(|v|/2) v/|v|)``; below ``|v| = 1e-8`` the
    second-order Taylor expansion is used.

    Args:
        v: Rotation vector(s), shape ``(..., 3)``, radians

    Returns:
        Unit quaternion(s), shape ``(..., 4)``
    """
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    w = np.where(small, 1.0 - theta**2 / 8.0, np.cos(0.5 * theta))
    scale = np.where(small, 0.5 - theta**2 / 48.0, np.sin(0.5 * safe) / safe)
    return np.concatenate([w[..., None], v * scale[..., None]], axis=-1)


def quat_log(q: np.ndarray) -> np.ndarray:
    """Inverse of :func:`quat_exp` for unit quaternions.

    Returns the rotation vector ``2·atan2(|xyz|, w)·xyz/|xyz|``. The
    small-angle branch applies below ``|xyz| = 1e-8`` with ``w > 0``.
    """
    q = np.asarray(q, dtype=float)
    w = q[..., 0]
    xyz = q[..., 1:]
    n = np.linalg.norm(xyz, axis=-1)
    small = (n < SMALL_ANGLE) & (w > 0.0)
    safe_n = np.where(n > 0.0, n, 1.0)
    safe_w = np.where(small, w, 1.0)
    scale = np.where(
        small,
        2.0 / safe_w * (1.0 - n**2 / (3.0 * safe_w**2)),
        np.where(n > 0.0, 2.0 * np.arctan2(n, w) / safe_n, 0.0),
    )
    return xyz * scale[..., None]


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix (or stack of matrices) of unit quaternion(s)."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    xx, yy, zz = x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    m = np.stack(
        [
            1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy),
            2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx),
            2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy),
        ],
        axis=-1,
    )
    return m.reshape(q.shape[:-1] + (3, 3))


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) ``v`` by ``R(q)`` with broadcasting."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    qv = q[..., 1:]
    t = 2.0 * np.cross(qv, v)
    return v + q[..., :1] * t + np.cross(qv, t)


def quat_angle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Geodesic angle in radians between two rotations."""
    rel = quat_multiply(quat_conjugate(a), b)
    return np.linalg.norm(quat_log(quat_canonical(rel)), axis=-1)


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix ``[v]x``."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
