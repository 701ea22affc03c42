"""
Uniform cubic B-spline basis: knot grid, blending matrices and the
power-basis vectors they act on.
"""

import math
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core.errors import DomainError

ORDER = 4

# Matrix form: p(u) = sum_j (u^T M4)_j p_{i+j}, u = (1, u, u^2, u^3).
M4 = np.array(
    [
        [1.0, 4.0, 1.0, 0.0],
        [-3.0, 0.0, 3.0, 0.0],
        [3.0, -6.0, 3.0, 0.0],
        [-1.0, 3.0, -3.0, 1.0],
    ]
) / 6.0

# Cumulative form: lambda_j(u) = (u^T M4_cumulative)_j, lambda_0 == 1.
M4_CUMULATIVE = np.array(
    [
        [6.0, 5.0, 1.0, 0.0],
        [0.0, 3.0, 3.0, 0.0],
        [0.0, -3.0, 3.0, 0.0],
        [0.0, 1.0, -2.0, 1.0],
    ]
) / 6.0


@dataclass(frozen=True)
class SplineMatrices:
    """The two constant 4x4 blending matrices of a uniform cubic spline."""
    M4: np.ndarray = field(default_factory=lambda: M4.copy())
    Mtilde4: np.ndarray = field(default_factory=lambda: M4_CUMULATIVE.copy())


class KnotGrid(BaseModel):
    """Uniform knot grid shared by the position and rotation splines.

    Segment ``i`` covers ``[t0 + i*dt, t0 + (i+1)*dt)`` and blends control
    points ``i..i+3``; the domain is ``[t0, t0 + (n-3)*dt)``.
    """
    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "t0": 0.0,
                "dt": 0.02,
                "n": 503
            }
        }
    )

    t0: float = Field(..., description="Start of the domain (s)")
    dt: float = Field(..., gt=0.0, description="Knot spacing (s)")
    n: int = Field(..., ge=ORDER, description="Number of control points")

    @classmethod
    def covering(cls, t_start: float, t_end: float, dt: float) -> "KnotGrid":
        """Smallest grid starting at ``t_start`` whose domain reaches ``t_end``."""
        span = max(t_end - t_start, 0.0)
        segments = max(int(math.ceil(span / dt - 1e-9)), 1)
        return cls(t0=t_start, dt=dt, n=segments + 3)

    @property
    def t_end(self) -> float:
        """Exclusive end of the evaluation domain."""
        return self.t0 + (self.n - 3) * self.dt

    @property
    def segments(self) -> int:
        return self.n - 3

    def knot_time(self, k: Union[int, np.ndarray]) -> Union[float, np.ndarray]:
        """Time at which control point ``k`` has its peak weight."""
        return self.t0 + (np.asarray(k) - 1) * self.dt

    def contains(self, t: Union[float, np.ndarray]) -> np.ndarray:
        """Boolean mask of times inside the half-open domain."""
        t = np.asarray(t, dtype=float)
        return (t >= self.t0) & (t < self.t_end)

    def locate(self, t: Union[float, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
        """Segment index and normalized time for each timestamp.

        Args:
            t: Scalar or array of timestamps (s)

        Returns:
            ``(i, u)`` with integer segment indices and ``u`` in ``[0, 1)``

        Raises:
            DomainError: If any timestamp lies outside the domain
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        inside = self.contains(t)
        if not np.all(inside):
            bad = t[~inside][0]
            raise DomainError(bad, self.t0, self.t_end)
        s = (t - self.t0) / self.dt
        i = np.minimum(np.floor(s).astype(np.int64), self.n - ORDER)
        u = s - i
        return i, u


def power_basis(u: np.ndarray, dt: float, derivative: int = 0) -> np.ndarray:
    """Rows ``d^k/dt^k (1, u, u^2, u^3)`` for each normalized time ``u``."""
    u = np.asarray(u, dtype=float)
    one = np.ones_like(u)
    zero = np.zeros_like(u)
    if derivative == 0:
        rows = [one, u, u * u, u * u * u]
    elif derivative == 1:
        rows = [zero, one, 2.0 * u, 3.0 * u * u]
    elif derivative == 2:
        rows = [zero, zero, 2.0 * one, 6.0 * u]
    else:
        raise ValueError(f"derivative order {derivative} not supported")
    return np.stack(rows, axis=-1) / dt**derivative


def blending_weights(u: np.ndarray, dt: float, derivative: int = 0) -> np.ndarray:
    """Matrix-form weights of the four segment control points, shape ``(N, 4)``."""
    return power_basis(u, dt, derivative) @ M4


def cumulative_weights(u: np.ndarray, dt: float, derivative: int = 0) -> np.ndarray:
    """Cumulative-form weights ``lambda_0..lambda_3``, shape ``(N, 4)``."""
    return power_basis(u, dt, derivative) @ M4_CUMULATIVE
