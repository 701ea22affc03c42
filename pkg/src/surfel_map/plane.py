"""
Plane-likeness scoring and RANSAC plane fitting for voxel cells.
"""

import logging
from typing import Optional, Tuple, Union

import numpy as np

from .types import Surfel, VoxelCell

logger = logging.getLogger(__name__)

MIN_POINTS = 10
SEED_OFFSET = 1 << 20
RESAMPLE_ROUNDS = 10


def plane_likeness(cell: VoxelCell, min_points: int = MIN_POINTS) -> Optional[float]:
    """Eigenvalue planarity score ``2 (l1 - l0) / (l0 + l1 + l2)`` of a cell.

    Args:
        cell: Voxel cell with accumulated moments
        min_points: Minimum population for a meaningful score

    Returns:
        Score in ``[0, 1]``, or ``None`` when the cell is under-populated
    """
    if cell.count < min_points:
        return None
    eig = np.clip(np.linalg.eigvalsh(cell.covariance), 0.0, None)
    total = float(eig.sum())
    if total <= 0.0:
        return 0.0
    return float(np.clip(2.0 * (eig[1] - eig[0]) / total, 0.0, 1.0))


def cell_rng(seed: int, index: Tuple[int, int, int]) -> np.random.Generator:
    """Generator seeded from the run seed and the cell index."""
    return np.random.default_rng([seed] + [int(i) + SEED_OFFSET for i in index])


def total_least_squares_plane(points: np.ndarray) -> Tuple[np.ndarray, float]:
    """Plane through the centroid along the smallest covariance eigenvector."""
    centroid = points.mean(axis=0)
    centered = points - centroid
    _, vecs = np.linalg.eigh(centered.T @ centered)
    normal = vecs[:, 0]
    return canonical_plane(normal, -float(normal @ centroid))


def canonical_plane(normal: np.ndarray, d: float) -> Tuple[np.ndarray, float]:
    """Unit normal with ``d >= 0``; planes through the origin get a positive largest component."""
    norm = np.linalg.norm(normal)
    normal = normal / norm
    d = d / norm
    if d < 0.0 or (abs(d) < 1e-12 and normal[np.argmax(np.abs(normal))] < 0.0):
        normal, d = -normal, -d
    return normal, float(d)


def fit_plane_ransac(
    cell: VoxelCell,
    inlier_tol: float = 0.02,
    iters: int = 50,
    rng: Union[int, np.random.Generator, None] = None,
    min_inlier_ratio: float = 0.5,
    min_points: int = MIN_POINTS,
) -> Optional[Surfel]:
    """Fit a plane to a cell by three-point RANSAC and least-squares refinement.

    Args:
        cell: Voxel cell
        inlier_tol: Inlier distance (m)
        iters: Number of hypotheses
        rng: Generator or seed; defaults to a generator seeded by the cell index
        min_inlier_ratio: Reject the fit below this inlier fraction
        min_points: Minimum cell population

    Returns:
        The refined surfel, or ``None`` for degenerate or non-planar cells
    """
    points = cell.positions
    m = len(points)
    if m < max(min_points, 3):
        return None
    if rng is None:
        rng = cell_rng(0, cell.index)
    elif not isinstance(rng, np.random.Generator):
        rng = cell_rng(int(rng), cell.index)

    scale = float(np.max(np.ptp(points, axis=0)))
    if scale <= 0.0:
        return None

    samples = rng.integers(0, m, size=(iters, 3))
    for _ in range(RESAMPLE_ROUNDS):
        a, b, c = points[samples[:, 0]], points[samples[:, 1]], points[samples[:, 2]]
        normals = np.cross(b - a, c - a)
        degenerate = np.linalg.norm(normals, axis=1) < 1e-9 * scale * scale
        if not np.any(degenerate):
            break
        samples[degenerate] = rng.integers(0, m, size=(int(degenerate.sum()), 3))
    valid = ~degenerate
    if not np.any(valid):
        logger.debug(f"Cell {cell.index}: every RANSAC sample is degenerate")
        return None

    normals = normals[valid] / np.linalg.norm(normals[valid], axis=1, keepdims=True)
    offsets = -np.einsum("ij,ij->i", normals, a[valid])
    distances = np.abs(points @ normals.T + offsets[None, :])
    counts = np.sum(distances <= inlier_tol, axis=0)
    best = int(np.argmax(counts))
    inliers = distances[:, best] <= inlier_tol
    ratio = counts[best] / m
    if ratio < min_inlier_ratio:
        logger.debug(f"Cell {cell.index}: inlier ratio {ratio:.2f} below {min_inlier_ratio}")
        return None

    normal, d = total_least_squares_plane(points[inliers])
    score = plane_likeness(cell, min_points)
    return Surfel(normal=normal, d=d, planarity=0.0 if score is None else score, cell=cell)
