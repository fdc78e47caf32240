"""Robust alternating minimization for amplitude phase retrieval.

Each outer iteration fixes the measurement signs at the current iterate and
solves the resulting least-absolute-deviation regression:

    x_{k+1} = argmin_x sum_i | <a_i, x> - sign(<a_i, x_k>) b_i |
"""
from dataclasses import dataclass, field
import logging
import math
import time
from typing import List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from measurement import ProblemInstance
from operators import BaseOperator
from solvers import (
    AdmmConfig,
    AdmmLadSolver,
    AdmmLpSolver,
    BaseLadSolver,
    SignedLadProblem,
    SubgradientConfig,
    SubgradientSolver,
    sign,
)

logger = logging.getLogger(__name__)

TRACE_CSV_COLUMNS = ['k', 'dist', 'objective', 'inner_iters', 'wall_time_s']
InnerSolver = Literal['admm_lad', 'admm_lp', 'subgradient']
Status = Literal['success', 'max_outer', 'stalled']

# steps at most this many distance floors are not taken once the tolerance is at its floor
SETTLE_FACTOR = 10.0


def dist(x: np.ndarray, y: np.ndarray) -> float:
    """Distance up to global sign: min(||x - y||, ||x + y||)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dist needs vectors of equal length, got {x.shape} and {y.shape}")
    return float(min(np.linalg.norm(x - y), np.linalg.norm(x + y)))


def signed_targets(op: BaseOperator, b: np.ndarray, x_k: np.ndarray) -> np.ndarray:
    """c_i = sign(<a_i, x_k>) b_i with sign(0) = +1."""
    return sign(op.apply(x_k)) * np.asarray(b, dtype=np.float64)


def amplitude_objective(op: BaseOperator, b: np.ndarray, x: np.ndarray) -> float:
    """Phase retrieval LAD objective (1/m) sum_i | |<a_i, x>| - b_i |."""
    return float(np.mean(np.abs(np.abs(op.apply(x)) - b)))


def distance_floor(op: BaseOperator, tolerance: float) -> float:
    """
    Distance an inner solve accurate to ``tolerance`` (sum form) can resolve.

    Near a minimizer sum_i |<a_i, h>| grows like m sqrt(2/pi) s ||h||, with s
    the rms entry of A, so a suboptimality of ``tolerance`` leaves the
    solution undetermined below tolerance / (m sqrt(2/pi) s).

    Args:
        op: Measurement operator
        tolerance: Sum-form inner tolerance

    Returns:
        float: Distance floor
    """
    row_scale = math.sqrt(op.frobenius_norm_sq() / (op.m * op.d))
    return tolerance / (op.m * math.sqrt(2.0 / math.pi) * row_scale)


class RobustAmConfig(BaseModel):
    """
    Outer loop settings and the inner solver choice.
    """
    inner: InnerSolver = Field(default='admm_lad')
    admm: AdmmConfig = Field(default_factory=AdmmConfig)
    subgradient: SubgradientConfig = Field(default_factory=SubgradientConfig)
    max_outer: int = Field(default=100, ge=1)
    dist_tol: Optional[float] = Field(default=None, gt=0.0, description="Benchmark stop on dist to the known truth")
    change_tol: float = Field(default=1e-10, gt=0.0, description="Stop on relative iterate change")
    tolerance_schedule: Literal['fixed', 'geometric'] = Field(default='fixed')
    inner_tolerance: Optional[float] = Field(default=None, gt=0.0, description="Fixed inner tolerance; defaults to 1e-8 m")
    initial_tolerance: Optional[float] = Field(default=None, gt=0.0, description="First geometric tolerance; defaults to 1e-2 m")
    tolerance_decay: float = Field(default=0.1, gt=0.0, lt=1.0)
    stall_patience: int = Field(default=5, ge=1)
    warm_start: bool = Field(default=True)
    record_trace: bool = Field(default=True)

    @model_validator(mode='after')
    def validate_schedule(self):
        if (self.tolerance_schedule == 'geometric' and self.initial_tolerance is not None
                and self.inner_tolerance is not None and self.initial_tolerance < self.inner_tolerance):
            raise ValueError("initial_tolerance must not be below inner_tolerance for the geometric schedule")
        return self

    def tolerance_floor(self, m: int) -> float:
        """Fixed inner tolerance, which is also the floor of the geometric schedule."""
        return self.inner_tolerance if self.inner_tolerance is not None else 1e-8 * m

    def tolerance(self, k: int, m: int) -> float:
        """Inner tolerance for outer iteration k (0-based) on m measurements."""
        floor = self.tolerance_floor(m)
        if self.tolerance_schedule == 'fixed':
            return floor
        start = self.initial_tolerance if self.initial_tolerance is not None else 1e-2 * m
        return max(start * self.tolerance_decay ** k, floor)


@dataclass
class IterateTrace:
    """Per-outer-iteration record; row k describes x_k for k >= 1.

    ``dist_floor`` is the distance floor of the run's final inner tolerance.
    """
    initial_dist: Optional[float] = None
    rows: List[tuple] = field(default_factory=list)
    dist_floor: Optional[float] = None

    def append(self, k: int, dist_to_truth: Optional[float], objective: float, inner_iters: int,
               wall_time_s: float, amplitude: float) -> None:
        if self.rows and k <= self.rows[-1][0]:
            raise ValueError(f"Trace rows must be ordered by k, got {k} after {self.rows[-1][0]}")
        if wall_time_s < 0:
            raise ValueError(f"Wall time must be nonnegative, got {wall_time_s}")
        self.rows.append((k, math.nan if dist_to_truth is None else dist_to_truth,
                          objective, inner_iters, wall_time_s, amplitude))

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def dists(self) -> np.ndarray:
        return np.array([row[1] for row in self.rows], dtype=np.float64)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=TRACE_CSV_COLUMNS + ['amplitude_objective'])


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    outer_iterations: int
    status: Status
    trace: Optional[IterateTrace] = None
    inner_iterations: int = 0
    cache_build_s: float = 0.0
    elapsed_s: float = 0.0


def make_solver(cfg: RobustAmConfig, lp_max_rows: Optional[int] = None) -> BaseLadSolver:
    """Fresh inner solver for ``cfg.inner``; its cache is built on first use."""
    if cfg.inner == 'admm_lad':
        return AdmmLadSolver(cfg.admm)
    if cfg.inner == 'admm_lp':
        return AdmmLpSolver(cfg.admm, max_rows=lp_max_rows)
    return SubgradientSolver(cfg.subgradient)


def robust_am(instance: ProblemInstance, x0: np.ndarray, cfg: Optional[RobustAmConfig] = None,
              solver: Optional[BaseLadSolver] = None) -> RecoveryResult:
    """
    Run Robust-AM from ``x0``.

    Stops with ``success`` when the relative change ||x_{k+1} - x_k|| / ||x_k||
    drops to ``change_tol`` or, when ``dist_tol`` is set and the truth is
    known, when dist(x_{k+1}, x_star) <= dist_tol. Once the inner tolerance has
    reached its floor, a step no longer than SETTLE_FACTOR distance floors is
    not taken: x_k is kept, recorded again as row k+1, and the run stops with
    ``success``. Stops with ``stalled`` on a
    zero iterate or when the amplitude objective has not decreased for
    ``stall_patience`` iterations, and with ``max_outer`` otherwise.

    Args:
        instance: Operator, amplitudes and (optionally) the truth
        x0: Nonzero starting point
        cfg: Outer loop settings
        solver: Inner solver to reuse (with its cache); a new one is made when omitted

    Returns:
        RecoveryResult

    Raises:
        ValueError: If x0 is zero or has the wrong length
        SolverError: If the inner solver fails
    """
    cfg = cfg or RobustAmConfig()
    op = instance.operator
    b = instance.b
    x_star = instance.x_star

    x = np.array(x0, dtype=np.float64)
    if x.shape != (op.d,):
        raise ValueError(f"Initial point must have length {op.d}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("Initial point contains non-finite entries")
    if not np.any(x):
        raise ValueError("Initial point is the zero vector; measurement signs are undefined there")

    solver = solver or make_solver(cfg)
    build_start = time.perf_counter()
    solver.prepare(op)
    cache_build_s = time.perf_counter() - build_start

    floor_tolerance = cfg.tolerance_floor(op.m)
    floor_dist = distance_floor(op, floor_tolerance)
    trace = None
    if cfg.record_trace:
        trace = IterateTrace(initial_dist=dist(x, x_star) if x_star is not None else None, dist_floor=floor_dist)
    best_amplitude = amplitude_objective(op, b, x)
    stalls = 0
    inner_total = 0
    status: Status = 'max_outer'
    start = time.perf_counter()
    k = 0

    for k in range(1, cfg.max_outer + 1):
        c = signed_targets(op, b, x)
        tolerance = cfg.tolerance(k - 1, op.m)
        problem = SignedLadProblem(op, c, tolerance, warm_start=x if cfg.warm_start else None)
        solution = solver.solve(problem)
        inner_total += solution.iterations

        step = float(np.linalg.norm(solution.x - x))
        change = step / float(np.linalg.norm(x))
        settled = tolerance <= floor_tolerance and step <= SETTLE_FACTOR * floor_dist
        if not settled:
            x = solution.x
        dist_k = dist(x, x_star) if x_star is not None else None
        amplitude = amplitude_objective(op, b, x)

        if trace is not None:
            trace.append(k, dist_k, solution.objective, solution.iterations, time.perf_counter() - start, amplitude)
        logger.debug(f"Robust-AM k={k}: dist={dist_k} objective={solution.objective:.3e} "
                     f"inner={solution.iterations} ({solution.status}) change={change:.3e}")

        if not np.any(x):
            logger.warning(f"Robust-AM reached the zero vector at k={k}")
            status = 'stalled'
            break
        if cfg.dist_tol is not None and dist_k is not None and dist_k <= cfg.dist_tol:
            status = 'success'
            break
        if settled or change <= cfg.change_tol:
            status = 'success'
            break

        if amplitude < best_amplitude:
            best_amplitude = amplitude
            stalls = 0
        else:
            stalls += 1
            if stalls >= cfg.stall_patience:
                status = 'stalled'
                break

    return RecoveryResult(
        x_hat=x,
        outer_iterations=k,
        status=status,
        trace=trace,
        inner_iterations=inner_total,
        cache_build_s=cache_build_s,
        elapsed_s=time.perf_counter() - start
    )
