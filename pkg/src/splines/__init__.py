"""
Uniform cubic B-splines on R^3 and SO(3).

This package provides the knot grid, the constant blending matrices, the
quaternion algebra they rely on and the two curve types used to represent
continuous-time trajectories.
"""

from .basis import M4, M4_CUMULATIVE, KnotGrid, SplineMatrices
from .curves import (
    SplineR3,
    SplineSO3,
    eval_acceleration,
    eval_angular_velocity_body,
    eval_orientation,
    eval_position,
    eval_velocity,
)
from .quaternion import (
    quat_angle,
    quat_canonical,
    quat_conjugate,
    quat_exp,
    quat_identity,
    quat_log,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    quat_to_matrix,
)

__all__ = [
    "M4",
    "M4_CUMULATIVE",
    "KnotGrid",
    "SplineMatrices",
    "SplineR3",
    "SplineSO3",
    "eval_acceleration",
    "eval_angular_velocity_body",
    "eval_orientation",
    "eval_position",
    "eval_velocity",
    "quat_angle",
    "quat_canonical",
    "quat_conjugate",
    "quat_exp",
    "quat_identity",
    "quat_log",
    "quat_multiply",
    "quat_normalize",
    "quat_rotate",
    "quat_to_matrix",
]
