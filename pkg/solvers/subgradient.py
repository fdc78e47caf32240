"""Restarted subgradient method (RSG) for the signed LAD problem."""
import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from operators import BaseOperator

from .base import BaseLadSolver, LadSolution, SignedLadProblem, check_finite, lad_objective, sign

logger = logging.getLogger(__name__)


class SubgradientConfig(BaseModel):
    """
    Step schedule of the restarted subgradient method.

    The step size stays at step0 / 2^j during epoch j (``restart_period``
    steps each) and the best iterate by objective is returned. The trace has
    one row per epoch holding the best objective so far.
    """
    step0: Optional[float] = Field(default=None, gt=0.0, description="Initial step; defaults to ||A^T c|| / (m ||A||_F^2)")
    restart_period: Optional[int] = Field(default=None, ge=1, description="Steps per epoch T; defaults to 100 * ceil(log2 m)")
    epochs: int = Field(default=20, ge=1)
    early_stop: bool = Field(default=False, description="Stop once an epoch improves the objective by at most tolerance / m")
    record_trace: bool = Field(default=False)
    log_every: int = Field(default=0, ge=0, description="Debug log period in epochs (0 disables)")


def default_step(op: BaseOperator, c: np.ndarray) -> float:
    fro = op.frobenius_norm_sq()
    step = float(np.linalg.norm(op.apply_adjoint(c))) / (op.m * fro)
    return step if step > 0 else 1.0 / fro


def default_period(m: int) -> int:
    return max(1, 100 * math.ceil(math.log2(m)))


def solve_lad_subgradient(p: SignedLadProblem, cfg: Optional[SubgradientConfig] = None) -> LadSolution:
    """
    Minimize the signed LAD objective by subgradient steps with halving restarts.

    x <- x - (eta_t / m) A^T sign(A x - c), where eta_t is constant for T
    consecutive steps and then halves.

    Args:
        p: Signed LAD problem
        cfg: Step schedule

    Returns:
        LadSolution holding the best iterate seen, the start point included

    Raises:
        DivergenceError: If an iterate becomes non-finite
    """
    cfg = cfg or SubgradientConfig()
    op = p.operator
    c = p.target
    m = op.m

    step = cfg.step0 if cfg.step0 is not None else default_step(op, c)
    period = cfg.restart_period if cfg.restart_period is not None else default_period(m)

    x = p.initial_point()
    residual = op.apply(x) - c
    objective = float(np.mean(np.abs(residual)))
    best_x, best_objective = x.copy(), objective

    status = 'max_iters'
    trace = []
    iteration = 0

    for epoch in range(cfg.epochs):
        if best_objective == 0.0:
            status = 'converged'
            break
        epoch_start_best = best_objective

        for _ in range(period):
            x = x - (step / m) * op.apply_adjoint(sign(residual))
            residual = op.apply(x) - c
            objective = float(np.mean(np.abs(residual)))
            iteration += 1
            if objective < best_objective:
                best_x, best_objective = x.copy(), objective

        check_finite('Subgradient', x)

        if cfg.record_trace:
            trace.append((iteration, best_objective, math.nan, math.nan, step))
        if cfg.log_every and (epoch + 1) % cfg.log_every == 0:
            logger.debug(f"Subgradient epoch {epoch + 1}: objective={objective:.3e} best={best_objective:.3e} step={step:.3e}")

        if cfg.early_stop and (epoch_start_best - best_objective) * m <= p.tolerance:
            status = 'converged'
            break

        step /= 2.0

    return LadSolution(
        x=best_x,
        objective=lad_objective(op, c, best_x),
        iterations=iteration,
        status=status,
        trace=trace
    )


class SubgradientSolver(BaseLadSolver):
    name = 'subgradient'
    description = "Restarted subgradient method with step halving every T iterations"

    def __init__(self, config: Optional[SubgradientConfig] = None):
        self.config = config or SubgradientConfig()

    def solve(self, problem: SignedLadProblem) -> LadSolution:
        return solve_lad_subgradient(problem, self.config)
