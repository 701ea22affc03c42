"""
Point-to-plane ICP against a surfel map, and a scan-to-map odometry
built on it.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from src.config import SurfelConfig
from src.core.errors import DegenerateRegistrationError
from src.splines.quaternion import (
    quat_exp,
    quat_identity,
    quat_multiply,
    quat_rotate,
)
from src.surfel_map import Scan, SurfelMap

from .types import ScanPose, compose_pose, relative_pose

logger = logging.getLogger(__name__)

MIN_CORRESPONDENCES = 20
CONVERGENCE_TOL = 1e-6
CONDITION_FLOOR = 1e-9
MAX_HALVINGS = 10

RotationPrior = Callable[[float, float], np.ndarray]

_DIRECTION_LABELS = ["rot_x", "rot_y", "rot_z", "trans_x", "trans_y", "trans_z"]


def _plane_terms(
    points: np.ndarray,
    normals: np.ndarray,
    offsets: np.ndarray,
    q: np.ndarray,
    p: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    rotated = quat_rotate(q, points)
    residual = np.einsum("ij,ij->i", rotated + p, normals) + offsets
    return rotated, residual


def _null_directions(eigvals: np.ndarray, eigvecs: np.ndarray) -> List[str]:
    scale = max(float(eigvals[-1]), 1e-300)
    labels = []
    for value, vec in zip(eigvals, eigvecs.T):
        if value < CONDITION_FLOOR * scale:
            dominant = int(np.argmax(np.abs(vec)))
            labels.append(f"{_DIRECTION_LABELS[dominant]} (eigenvalue {value:.2e})")
    return labels


def icp_point_to_plane(
    scan: Scan,
    surfel_map: SurfelMap,
    initial_guess: ScanPose,
    max_iters: int = 30,
    max_distance: float = 0.5,
) -> ScanPose:
    """Register a scan to the map's surfels by Gauss-Newton on point-to-plane distances.

    Correspondences are re-gathered each iteration from the cells the
    transformed points fall into. Each step is halved until the cost over
    the current correspondences does not increase.

    Args:
        scan: Scan in its own LiDAR frame
        surfel_map: Map with extracted surfels
        initial_guess: Starting pose of the scan in the map frame
        max_iters: Gauss-Newton iteration cap
        max_distance: Correspondence gate on absolute distance (m)

    Returns:
        Registered pose with ``fitness`` set to the final mean absolute residual

    Raises:
        DegenerateRegistrationError: With fewer than 20 correspondences or an
            unconstrained pose direction
    """
    normals_all, offsets_all = surfel_map.plane_arrays()
    q = np.array(initial_guess.q, dtype=float)
    p = np.array(initial_guess.p, dtype=float)
    fitness = float("nan")

    for iteration in range(max_iters):
        slot = surfel_map.lookup(quat_rotate(q, scan.points) + p)
        has = slot >= 0
        points = scan.points[has]
        normals = normals_all[slot[has]]
        offsets = offsets_all[slot[has]]
        rotated, residual = _plane_terms(points, normals, offsets, q, p)
        gate = np.abs(residual) <= max_distance
        if np.count_nonzero(gate) < MIN_CORRESPONDENCES:
            message = f"{int(np.count_nonzero(gate))} correspondences at t={scan.t_ref:.3f}"
            logger.error(f"ICP failed: {message}")
            raise DegenerateRegistrationError(f"Too few correspondences for registration ({message})")
        points, normals, offsets = points[gate], normals[gate], offsets[gate]
        rotated, residual = rotated[gate], residual[gate]
        fitness = float(np.mean(np.abs(residual)))

        jac = np.hstack([np.cross(rotated, normals), normals])
        hessian = jac.T @ jac
        gradient = jac.T @ residual
        eigvals, eigvecs = np.linalg.eigh(hessian)
        null = _null_directions(eigvals, eigvecs)
        if null:
            logger.error(f"ICP degenerate at t={scan.t_ref:.3f}: {null}")
            raise DegenerateRegistrationError("Registration unconstrained", null)
        delta = -np.linalg.solve(hessian, gradient)

        cost = float(residual @ residual)
        step = 1.0
        for _ in range(MAX_HALVINGS):
            q_new = quat_multiply(quat_exp(step * delta[:3]), q)
            p_new = p + step * delta[3:]
            _, trial = _plane_terms(points, normals, offsets, q_new, p_new)
            if float(trial @ trial) <= cost:
                q, p = q_new, p_new
                fitness = float(np.mean(np.abs(trial)))
                break
            step *= 0.5
        else:
            logger.debug(f"ICP line search stalled at iteration {iteration}")
            break

        update = step * float(np.linalg.norm(delta))
        logger.debug(f"ICP iteration {iteration}: cost {cost:.3e}, update {update:.2e}")
        if update < CONVERGENCE_TOL:
            break

    return ScanPose(t=initial_guess.t, q=q, p=p, fitness=fitness)


class IcpOdometry:
    """Scan-to-map odometry growing a surfel map as scans are registered.

    The first scan defines the map frame. Each later scan starts from a
    constant-velocity guess whose rotation can be replaced by a prediction
    from the IMU.

    Args:
        config: Surfel settings used for the odometry map
        cell_size: Voxel edge length (m)
        max_iters: ICP iteration cap per scan
        max_distance: ICP correspondence gate (m)
        rebuild_every: Re-extract surfels after this many registered scans
        seed: RANSAC seed
        rotation_prior: Optional ``f(t_a, t_b)`` giving the LiDAR rotation from
            scan ``a`` to scan ``b``
    """

    def __init__(
        self,
        config: SurfelConfig,
        cell_size: float,
        max_iters: int = 30,
        max_distance: float = 0.5,
        rebuild_every: int = 5,
        seed: int = 0,
        rotation_prior: Optional[RotationPrior] = None,
    ):
        self.config = config
        self.cell_size = cell_size
        self.max_iters = max_iters
        self.max_distance = max_distance
        self.rebuild_every = max(1, rebuild_every)
        self.seed = seed
        self.rotation_prior = rotation_prior
        self.surfel_map = SurfelMap(cell_size)

    def _initial_guess(self, poses: List[ScanPose], scan: Scan) -> ScanPose:
        last = poses[-1]
        if len(poses) >= 2:
            q_rel, p_rel = relative_pose(poses[-2], last)
        else:
            q_rel, p_rel = quat_identity(), np.zeros(3)
        if self.rotation_prior is not None:
            q_rel = self.rotation_prior(last.t, scan.t_ref)
        return compose_pose(last, q_rel, p_rel, scan.t_ref)

    def estimate(self, scans: Sequence[Scan]) -> List[ScanPose]:
        """Register every scan in order.

        Raises:
            DegenerateRegistrationError: When any scan cannot be registered
        """
        if not scans:
            return []
        first = scans[0]
        poses = [ScanPose(t=first.t_ref, q=quat_identity(), p=np.zeros(3), fitness=0.0)]
        self.surfel_map.insert(first.points)
        self.surfel_map.extract_surfels(self.config.planarity_first, self.config, self.seed)

        pending = 0
        for scan in scans[1:]:
            guess = self._initial_guess(poses, scan)
            pose = icp_point_to_plane(
                scan, self.surfel_map, guess, self.max_iters, self.max_distance
            )
            poses.append(pose)
            self.surfel_map.insert(pose.transform(scan.points))
            pending += 1
            if pending >= self.rebuild_every:
                self.surfel_map.extract_surfels(
                    self.config.planarity_first, self.config, self.seed
                )
                pending = 0

        fitness = [p.fitness for p in poses[1:] if p.fitness is not None]
        logger.info(
            f"ICP odometry registered {len(poses)} scans "
            f"(mean fitness {np.mean(fitness) if fitness else 0.0:.4f} m)"
        )
        return poses
