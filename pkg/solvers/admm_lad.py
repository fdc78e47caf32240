"""ADMM for the signed LAD problem with a cached pseudoinverse.

Splitting min_x ||y - c||_1 subject to A x = y gives closed-form updates

    x <- A^+ (y - u)
    y <- c + sign(v) * max(|v| - 1/rho, 0),   v = A x + u - c
    u <- u + A x - y

in the scaled dual u = phi / rho. The only factorization is the least-squares
cache of A, built once and reused for every target.
"""
import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from operators import BaseOperator

from .base import BaseLadSolver, LadSolution, SignedLadProblem, check_finite, lad_objective
from .caches import LsCache, build_ls_cache

logger = logging.getLogger(__name__)


class AdmmConfig(BaseModel):
    """
    Step size, residual balancing and stopping settings shared by both ADMM solvers.
    """
    rho0: float = Field(default=1.0, gt=0.0, description="Initial penalty rho")
    vary_rho: bool = Field(default=True, description="Rescale rho by residual balancing")
    mu: float = Field(default=10.0, gt=0.0, description="Residual ratio that triggers a rho update")
    tau_incr: float = Field(default=2.0, gt=1.0)
    tau_decr: float = Field(default=2.0, gt=1.0)
    max_iters: int = Field(default=10000, ge=1)
    abs_tol: float = Field(default=1e-8, gt=0.0)
    rel_tol: float = Field(default=1e-8, gt=0.0)
    gap_every: int = Field(default=10, ge=1, description="Iterations between duality-gap checks")
    record_trace: bool = Field(default=False)
    log_every: int = Field(default=0, ge=0, description="Debug log period in iterations (0 disables)")


def duality_gap(op: BaseOperator, cache: LsCache, c: np.ndarray, ax: np.ndarray, phi: np.ndarray) -> float:
    """
    Sum-form suboptimality certificate ||A x - c||_1 + c^T nu.

    nu is the unscaled dual phi clipped to the unit box, projected onto
    null(A^T) and scaled back into the box, hence dual feasible.

    Args:
        op: Measurement operator
        cache: Least-squares cache of ``op``
        c: Signed target
        ax: A x at the current primal iterate
        phi: Unscaled dual iterate

    Returns:
        float: Upper bound on sum_i |<a_i, x> - c_i| minus its minimum
    """
    nu = np.clip(phi, -1.0, 1.0)
    nu = nu - cache.project_range(nu)
    peak = np.max(np.abs(nu)) if nu.size else 0.0
    if peak > 1.0:
        nu = nu / peak
    return float(np.sum(np.abs(ax - c)) + c @ nu)


def solve_lad_admm(p: SignedLadProblem, cache: LsCache, cfg: Optional[AdmmConfig] = None) -> LadSolution:
    """
    Run ADMM-LAD on one signed subproblem.

    Stops as ``converged`` when the primal and dual residuals fall below the
    absolute/relative tolerances or when the duality gap is at most
    ``p.tolerance``; otherwise returns ``max_iters``.

    Args:
        p: Signed LAD problem
        cache: Least-squares cache built for ``p.operator``
        cfg: Solver settings

    Returns:
        LadSolution

    Raises:
        CacheMismatchError: If the cache belongs to another operator
        DivergenceError: If an iterate becomes non-finite
    """
    cfg = cfg or AdmmConfig()
    op = p.operator
    cache.check(op)
    c = p.target
    m, d = op.m, op.d

    if p.warm_start is None:
        y = c.copy()
    else:
        y = op.apply(p.initial_point())
    u = np.zeros(m)
    rho = cfg.rho0

    x = np.zeros(d)
    ax = np.zeros(m)
    r_norm = s_norm = math.inf
    status = 'max_iters'
    trace = []
    iteration = 0

    for iteration in range(1, cfg.max_iters + 1):
        x = cache.solve(y - u)
        ax = op.apply(x)

        v = ax + u - c
        y_old = y
        y = c + np.sign(v) * np.maximum(np.abs(v) - 1.0 / rho, 0.0)
        u = u + ax - y
        check_finite('ADMM-LAD', x, y, u)

        r_norm = float(np.linalg.norm(ax - y))
        s_norm = float(rho * np.linalg.norm(op.apply_adjoint(y - y_old)))
        eps_pri = math.sqrt(m) * cfg.abs_tol + cfg.rel_tol * max(np.linalg.norm(ax), np.linalg.norm(y))
        eps_dual = math.sqrt(d) * cfg.abs_tol + cfg.rel_tol * rho * np.linalg.norm(op.apply_adjoint(u))

        if cfg.record_trace:
            trace.append((iteration, float(np.mean(np.abs(ax - c))), r_norm, s_norm, rho))
        if cfg.log_every and iteration % cfg.log_every == 0:
            logger.debug(f"ADMM-LAD iter {iteration}: r={r_norm:.3e} s={s_norm:.3e} rho={rho:.3e}")

        if r_norm <= eps_pri and s_norm <= eps_dual:
            status = 'converged'
            break

        if iteration % cfg.gap_every == 0:
            gap = duality_gap(op, cache, c, ax, rho * u)
            if gap <= p.tolerance:
                status = 'converged'
                break

        if cfg.vary_rho:
            if r_norm > cfg.mu * s_norm:
                rho *= cfg.tau_incr
                u /= cfg.tau_incr
            elif s_norm > cfg.mu * r_norm:
                rho /= cfg.tau_decr
                u *= cfg.tau_decr

    gap = duality_gap(op, cache, c, ax, rho * u)

    return LadSolution(
        x=x,
        objective=lad_objective(op, c, x),
        iterations=iteration,
        primal_residual=r_norm,
        dual_residual=s_norm,
        status=status,
        gap=gap,
        trace=trace
    )


class AdmmLadSolver(BaseLadSolver):
    """ADMM-LAD with a least-squares cache built on first use and reused afterwards."""
    name = 'admm_lad'
    description = "ADMM on min ||y - c||_1 s.t. Ax = y with a cached pseudoinverse"

    def __init__(self, config: Optional[AdmmConfig] = None, cache: Optional[LsCache] = None):
        self.config = config or AdmmConfig()
        self.cache = cache

    def prepare(self, op: BaseOperator) -> LsCache:
        if self.cache is None:
            self.cache = build_ls_cache(op)
        return self.cache

    def solve(self, problem: SignedLadProblem) -> LadSolution:
        return solve_lad_admm(problem, self.prepare(problem.operator), self.config)
