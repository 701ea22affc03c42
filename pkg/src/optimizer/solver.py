"""
Levenberg-Marquardt minimization of the calibration problem and the
observability check run before it.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse
from scipy.sparse.linalg import splu, spsolve

from src.config import SolverOptions
from src.core.errors import DivergenceError, ObservabilityError

from .jacobian import build_normal_equations
from .problem import Problem
from .state import CalibState, StateLayout

logger = logging.getLogger(__name__)

COST_FLOOR = 1e-18
OBSERVABILITY_TOL = 1e-10
MAX_LAMBDA = 1e16
MAX_REPORTED_DIRECTIONS = 6


class LmIteration(BaseModel):
    """One Levenberg-Marquardt trial step."""
    model_config = ConfigDict(
        populate_by_name=True,
        json_schema_extra={
            "example": {
                "iteration": 1,
                "cost": 1234.5,
                "lambda": 1e-4,
                "step_norm": 0.01,
                "accepted": True,
                "q_LI": [1.0, 0.0, 0.0, 0.0],
                "p_LI": [0.1, -0.05, 0.15]
            }
        }
    )

    iteration: int = Field(..., ge=1, description="Trial number")
    cost: float = Field(..., description="Cost after the step if accepted, else the trial cost")
    damping: float = Field(..., alias="lambda", description="Damping used for the step")
    step_norm: float = Field(..., ge=0.0, description="Norm of the increment")
    accepted: bool = Field(..., description="Whether the step lowered the cost")
    q_LI: List[float] = Field(..., description="Extrinsic rotation after the step (w, x, y, z)")
    p_LI: List[float] = Field(..., description="Extrinsic translation after the step (m)")


class ConvergenceReport(BaseModel):
    """Trace of one optimizer run."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "initial_cost": 1234.5,
                "final_cost": 0.5,
                "converged": True,
                "termination": "relative cost change below tolerance",
                "iterations": []
            }
        }
    )

    initial_cost: float = Field(default=0.0, description="Cost at the initial state")
    final_cost: float = Field(default=0.0, description="Cost at the returned state")
    converged: bool = Field(default=False, description="Stopped on a convergence criterion")
    termination: str = Field(default="", description="Reason the loop stopped")
    iterations: List[LmIteration] = Field(default_factory=list, description="Per-trial records")

    @property
    def accepted_steps(self) -> int:
        return sum(1 for it in self.iterations if it.accepted)


def check_observability(
    H: sparse.spmatrix,
    layout: StateLayout,
    rel_tol: float = OBSERVABILITY_TOL,
) -> None:
    """Raise if the normal equations leave some direction unconstrained.

    The matrix is Jacobi-scaled, the trajectory control points are
    eliminated through a sparse LU factorization and the reduced system
    over extrinsics, biases and gravity is checked by its eigenvalues.

    Raises:
        ObservabilityError: Listing the near-null directions
    """
    labels = layout.labels()
    diag = H.diagonal()
    empty = np.flatnonzero(diag <= 0.0)
    if len(empty):
        directions = [labels[k] for k in empty[:MAX_REPORTED_DIRECTIONS]]
        if len(empty) > MAX_REPORTED_DIRECTIONS:
            directions.append(f"... {len(empty) - MAX_REPORTED_DIRECTIONS} more")
        logger.error(f"{len(empty)} parameters have no constraint")
        raise ObservabilityError("Unconstrained parameters", directions)

    scale = sparse.diags(1.0 / np.sqrt(diag))
    scaled = (scale @ H @ scale).tocsc()
    ctrl = layout.ctrl_columns
    calib = layout.calib_columns
    h_cc = scaled[ctrl][:, ctrl].tocsc()
    h_ce = scaled[ctrl][:, calib].toarray()
    h_ee = scaled[calib][:, calib].toarray()
    try:
        lu = splu(h_cc)
    except RuntimeError as e:
        logger.error(f"Trajectory block is singular: {e}")
        raise ObservabilityError("Trajectory control points unconstrained", [str(e)]) from e
    reduced = h_ee - h_ce.T @ lu.solve(h_ce)
    reduced = 0.5 * (reduced + reduced.T)
    eigvals, eigvecs = np.linalg.eigh(reduced)
    top = max(float(eigvals[-1]), 1e-300)
    weak = np.flatnonzero(eigvals < rel_tol * top)
    if len(weak):
        names = [labels[k] for k in calib]
        directions = [
            f"{names[int(np.argmax(np.abs(eigvecs[:, k])))]} (eigenvalue {eigvals[k]:.2e})"
            for k in weak
        ]
        logger.error(f"Near-null directions in calibration block: {directions}")
        raise ObservabilityError("Rank-deficient normal equations", directions)


def _solve_damped(H: sparse.csr_matrix, g: np.ndarray, damping: float) -> Optional[np.ndarray]:
    diag = H.diagonal()
    system = (H + sparse.diags(damping * diag)).tocsc()
    delta = spsolve(system, -g)
    delta = np.asarray(delta).reshape(-1)
    if not np.all(np.isfinite(delta)):
        return None
    return delta


def solve_lm(
    problem: Problem,
    init: CalibState,
    opts: Optional[SolverOptions] = None,
    check: bool = True,
) -> Tuple[CalibState, ConvergenceReport]:
    """Minimize the problem's cost from ``init``.

    Each trial solves ``(H + lambda diag(H)) dx = -g``; accepted steps divide
    ``lambda`` by ``lambda_down``, rejected ones multiply it by ``lambda_up``.

    Args:
        problem: Measurements and noise model
        init: Initial state, already on the first-pose gauge
        opts: Solver options
        check: Run :func:`check_observability` on the first linearization

    Returns:
        The final state and its convergence report

    Raises:
        ObservabilityError: If the normal equations are rank deficient
        DivergenceError: If the cost becomes non-finite
    """
    opts = opts or SolverOptions()
    layout = StateLayout(init.grid.n, opts.estimate_gravity)
    state = init
    system = build_normal_equations(problem, state, layout, opts.fd_step, opts.threads)
    if not np.isfinite(system.cost):
        logger.error("Initial cost is not finite")
        raise DivergenceError("non-finite cost at the initial state")
    report = ConvergenceReport(initial_cost=system.cost, final_cost=system.cost)
    logger.info(f"LM start: cost {system.cost:.6e} over {system.rows} residuals, {layout.size} parameters")
    if check:
        check_observability(system.H, layout)
    if system.cost <= COST_FLOOR:
        report.converged = True
        report.termination = "cost below floor"
        return state, report

    damping = opts.lambda0
    for iteration in range(1, opts.max_iters + 1):
        delta = _solve_damped(system.H, system.g, damping)
        if delta is None:
            check_observability(system.H, layout)
            damping *= opts.lambda_up
            continue
        candidate = state.retract(delta, layout)
        cost = problem.cost(candidate)
        if not np.isfinite(cost):
            logger.error(f"Non-finite cost at LM iteration {iteration}")
            raise DivergenceError(f"non-finite cost at iteration {iteration}")
        accepted = cost < system.cost
        chosen = candidate if accepted else state
        report.iterations.append(
            LmIteration(
                iteration=iteration,
                cost=cost,
                damping=damping,
                step_norm=float(np.linalg.norm(delta)),
                accepted=accepted,
                q_LI=list(chosen.ext.q_LI),
                p_LI=list(chosen.ext.p_LI),
            )
        )
        logger.debug(
            f"LM iteration {iteration}: cost {cost:.6e} lambda {damping:.1e} "
            f"|dx| {np.linalg.norm(delta):.2e} {'accepted' if accepted else 'rejected'}"
        )
        if accepted:
            previous = system.cost
            state = candidate
            damping = max(damping / opts.lambda_down, 1e-12)
            if cost <= COST_FLOOR:
                report.converged = True
                report.termination = "cost below floor"
                break
            if (previous - cost) / previous < opts.tol:
                report.converged = True
                report.termination = "relative cost change below tolerance"
                break
            system = build_normal_equations(problem, state, layout, opts.fd_step, opts.threads)
        else:
            damping *= opts.lambda_up
            if damping > MAX_LAMBDA:
                report.termination = "no cost decrease at maximum damping"
                logger.warning(f"LM stalled at iteration {iteration}: damping above {MAX_LAMBDA:.0e}")
                break
    else:
        report.termination = "maximum iterations reached"

    report.final_cost = problem.cost(state)
    logger.info(
        f"LM finished after {len(report.iterations)} trials: cost {report.final_cost:.6e} "
        f"({report.termination})"
    )
    return state, report
