from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import ClassVar, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd

from operators import BaseOperator

TRACE_COLUMNS = ['inner_iter', 'objective', 'primal_res', 'dual_res', 'rho']


class SolverError(RuntimeError):
    """Base class for inner-solver failures."""


class DivergenceError(SolverError):
    """An iterate became non-finite."""


class SingularOperatorError(SolverError):
    """The operator is rank deficient below the factorization threshold."""


class CacheMismatchError(SolverError):
    """A cache was built for a different operator than the problem's."""


class CacheSizeError(SolverError):
    """A cache would exceed the configured memory guard."""


def sign(v: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) := +1."""
    return np.where(np.asarray(v) >= 0, 1.0, -1.0)


def lad_objective(op: BaseOperator, c: np.ndarray, x: np.ndarray) -> float:
    """
    Mean absolute residual (1/m) sum_i |<a_i, x> - c_i|.

    Args:
        op: Measurement operator
        c: Target of length m
        x: Point of length d

    Returns:
        float: Objective value

    Raises:
        ValueError: On dimension mismatch
    """
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (op.m,):
        raise ValueError(f"Dimension mismatch: target must have length {op.m}, got shape {c.shape}")
    return float(np.mean(np.abs(op.apply(x) - c)))


def check_finite(name: str, *arrays: np.ndarray) -> None:
    """Raise DivergenceError if any array has a non-finite entry."""
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise DivergenceError(f"{name} produced a non-finite iterate")


@dataclass(frozen=True)
class SignedLadProblem:
    """One inner subproblem: min_x sum_i |<a_i, x> - c_i| with c = Lambda_k b."""
    operator: BaseOperator
    target: np.ndarray
    tolerance: float
    warm_start: Optional[np.ndarray] = None

    def __post_init__(self):
        target = np.asarray(self.target, dtype=np.float64)
        if target.shape != (self.operator.m,):
            raise ValueError(f"Target must have length {self.operator.m}, got shape {target.shape}")
        if not np.all(np.isfinite(target)):
            raise ValueError("Target contains non-finite entries")
        if not self.tolerance > 0:
            raise ValueError(f"Tolerance must be positive, got {self.tolerance}")
        if self.warm_start is not None and np.shape(self.warm_start) != (self.operator.d,):
            raise ValueError(f"Warm start must have length {self.operator.d}, got shape {np.shape(self.warm_start)}")
        object.__setattr__(self, 'target', target)

    def initial_point(self) -> np.ndarray:
        if self.warm_start is None:
            return np.zeros(self.operator.d)
        return np.array(self.warm_start, dtype=np.float64)


@dataclass
class LadSolution:
    """Result of an inner solve; ``objective`` is the mean-form LAD value at ``x``."""
    x: np.ndarray
    objective: float
    iterations: int
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    status: Literal['converged', 'max_iters'] = 'converged'
    gap: Optional[float] = None
    trace: List[Tuple[int, float, float, float, float]] = field(default_factory=list)

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.trace, columns=TRACE_COLUMNS)


class BaseLadSolver(ABC):
    """
    Base class for signed-LAD inner solvers.

    A solver instance holds its configuration and any cached factorization of
    the operator; one instance per concurrent task.
    """
    name: ClassVar[str]
    description: ClassVar[str]

    def prepare(self, op: BaseOperator):
        """Build (or check) any operator-dependent cache ahead of the first solve."""
        return None

    @abstractmethod
    def solve(self, problem: SignedLadProblem) -> LadSolution:
        """
        Approximately minimize the signed LAD objective.

        Args:
            problem: Operator, signed target, tolerance and optional warm start

        Returns:
            LadSolution

        Raises:
            SolverError: If the solve diverges or the cache does not match
        """
        raise NotImplementedError("Subclasses must implement this method")
