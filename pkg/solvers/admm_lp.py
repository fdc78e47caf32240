"""ADMM on the standard-form linear program of the signed LAD problem.

With w = [x; t; u; s] the subproblem reads

    min  1^T t   s.t.  B w = p,  u >= 0,  s >= 0
    B = [[A, -I, 0, I], [A, I, -I, 0]],   p = [c; c]

so that t >= |A x - c| at every feasible point. The two-block splitting
w = y puts the equality constraints and the linear cost on w and the
nonnegativity on y:

    w  <- (I + B^T B)^{-1} (B^T (p - z1/rho) + y - (cost + z2)/rho)
    y  <- w + z2/rho, with the (u, s) blocks projected onto [0, inf)
    z1 <- z1 + rho (B w - p)
    z2 <- z2 + rho (w - y)

The inverse goes through the LP cache and does not depend on rho or on the
target, so residual balancing needs no refactorization.
"""
import logging
import math
from typing import Optional

import numpy as np

from operators import BaseOperator

from .admm_lad import AdmmConfig
from .base import BaseLadSolver, LadSolution, SignedLadProblem, check_finite, lad_objective
from .caches import LpCache, build_lp_cache

logger = logging.getLogger(__name__)


def lp_point(cache: LpCache, x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Feasible LP point [x; t; u; s] with the tightest slack t = |A x - c|."""
    residual = cache.matrix @ x - c
    t = np.abs(residual)
    return np.concatenate([x, t, residual + t, t - residual])


def solve_lad_lp_admm(p: SignedLadProblem, cache: LpCache, cfg: Optional[AdmmConfig] = None) -> LadSolution:
    """
    Run LP-form ADMM on one signed subproblem.

    Args:
        p: Signed LAD problem
        cache: LP cache built for ``p.operator``
        cfg: Solver settings (``gap_every`` is unused here)

    Returns:
        LadSolution with x taken from the first d coordinates of w

    Raises:
        CacheMismatchError: If the cache belongs to another operator
        DivergenceError: If an iterate becomes non-finite
    """
    cfg = cfg or AdmmConfig()
    op = p.operator
    cache.check(op)
    c = p.target
    m, d = op.m, op.d
    size = cache.size

    cost = np.zeros(size)
    cost[d:d + m] = 1.0
    target = np.concatenate([c, c])

    w = lp_point(cache, p.initial_point(), c)
    y = w.copy()
    z1 = np.zeros(2 * m)
    z2 = np.zeros(size)
    rho = cfg.rho0

    r_norm = s_norm = math.inf
    status = 'max_iters'
    trace = []
    iteration = 0

    for iteration in range(1, cfg.max_iters + 1):
        w = cache.apply_inverse(cache.apply_bt(target - z1 / rho) + y - (cost + z2) / rho)

        y_old = y
        y = w + z2 / rho
        y[d + m:] = np.maximum(y[d + m:], 0.0)

        bw = cache.apply_b(w)
        z1 = z1 + rho * (bw - target)
        z2 = z2 + rho * (w - y)
        check_finite('ADMM-LP', w, y, z1, z2)

        r_norm = math.sqrt(float(np.sum((bw - target) ** 2) + np.sum((w - y) ** 2)))
        s_norm = float(rho * np.linalg.norm(y - y_old))
        eps_pri = math.sqrt(2 * m + size) * cfg.abs_tol + cfg.rel_tol * max(
            math.hypot(np.linalg.norm(bw), np.linalg.norm(w)),
            math.hypot(np.linalg.norm(target), np.linalg.norm(y)))
        eps_dual = math.sqrt(size) * cfg.abs_tol + cfg.rel_tol * np.linalg.norm(cache.apply_bt(z1) + z2)

        if cfg.record_trace:
            trace.append((iteration, lad_objective(op, c, w[:d]), r_norm, s_norm, rho))
        if cfg.log_every and iteration % cfg.log_every == 0:
            logger.debug(f"ADMM-LP iter {iteration}: r={r_norm:.3e} s={s_norm:.3e} rho={rho:.3e}")

        if r_norm <= eps_pri and s_norm <= eps_dual:
            status = 'converged'
            break

        if cfg.vary_rho:
            if r_norm > cfg.mu * s_norm:
                rho *= cfg.tau_incr
            elif s_norm > cfg.mu * r_norm:
                rho /= cfg.tau_decr

    x = w[:d].copy()
    return LadSolution(
        x=x,
        objective=lad_objective(op, c, x),
        iterations=iteration,
        primal_residual=r_norm,
        dual_residual=s_norm,
        status=status,
        trace=trace
    )


class AdmmLpSolver(BaseLadSolver):
    """LP-form ADMM with the 2m x 2m factor built on first use and reused afterwards."""
    name = 'admm_lp'
    description = "Two-block ADMM on the standard-form LP with a matrix-inversion-lemma cache"

    def __init__(self, config: Optional[AdmmConfig] = None, cache: Optional[LpCache] = None,
                 max_rows: Optional[int] = None):
        self.config = config or AdmmConfig()
        self.cache = cache
        self.max_rows = max_rows

    def prepare(self, op: BaseOperator) -> LpCache:
        if self.cache is None:
            self.cache = build_lp_cache(op, self.max_rows)
        return self.cache

    def solve(self, problem: SignedLadProblem) -> LadSolution:
        return solve_lad_lp_admm(problem, self.prepare(problem.operator), self.config)
