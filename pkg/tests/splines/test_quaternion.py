"""Tests for the quaternion helpers against scipy's Rotation."""

import numpy as np
from scipy.spatial.transform import Rotation

from src.splines import (
    quat_angle,
    quat_canonical,
    quat_conjugate,
    quat_exp,
    quat_log,
    quat_multiply,
    quat_rotate,
    quat_to_matrix,
)
from src.splines.quaternion import skew


def to_scipy(q: np.ndarray) -> Rotation:
    return Rotation.from_quat(np.roll(q, -1, axis=-1))


def test_exp_matches_rotvec(rng):
    v = rng.normal(size=(50, 3))
    np.testing.assert_allclose(
        quat_to_matrix(quat_exp(v)), Rotation.from_rotvec(v).as_matrix(), atol=1e-12
    )


def test_log_inverts_exp(rng):
    v = rng.uniform(-1.0, 1.0, size=(50, 3)) * 2.0
    np.testing.assert_allclose(quat_log(quat_exp(v)), v, atol=1e-12)


def test_small_angle_branch():
    v = np.array([1e-10, -2e-10, 3e-10])
    q = quat_exp(v)
    np.testing.assert_allclose(np.linalg.norm(q), 1.0, atol=1e-15)
    np.testing.assert_allclose(quat_log(q), v, rtol=1e-9, atol=0.0)


def test_multiply_composes_rotations(rng):
    a = quat_exp(rng.normal(size=3))
    b = quat_exp(rng.normal(size=3))
    expected = (to_scipy(a) * to_scipy(b)).as_matrix()
    np.testing.assert_allclose(quat_to_matrix(quat_multiply(a, b)), expected, atol=1e-12)


def test_rotate_matches_matrix(rng):
    q = quat_exp(rng.normal(size=(20, 3)))
    v = rng.normal(size=(20, 3))
    expected = np.einsum("nij,nj->ni", quat_to_matrix(q), v)
    np.testing.assert_allclose(quat_rotate(q, v), expected, atol=1e-12)


def test_conjugate_is_inverse(rng):
    q = quat_exp(rng.normal(size=3))
    np.testing.assert_allclose(quat_multiply(q, quat_conjugate(q)), [1.0, 0.0, 0.0, 0.0], atol=1e-15)


def test_angle_ignores_sign():
    q = quat_exp(np.array([0.0, 0.0, 0.4]))
    assert quat_angle(q, -q) < 1e-12
    assert abs(quat_angle(np.array([1.0, 0.0, 0.0, 0.0]), q) - 0.4) < 1e-12
    assert quat_canonical(-q)[0] > 0.0


def test_skew_is_cross_product(rng):
    a, b = rng.normal(size=(2, 3))
    np.testing.assert_allclose(skew(a) @ b, np.cross(a, b), atol=1e-15)
