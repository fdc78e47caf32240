"""Brute-force LAD oracle for tiny problems.

An LAD minimizer exists at a vertex of the polyhedral objective, i.e. at a
point that interpolates d of the m rows, so enumerating all size-d row
subsets finds an exact optimum.
"""
from itertools import combinations
import logging

import numpy as np

from .base import LadSolution, SolverError

logger = logging.getLogger(__name__)

MAX_ROWS = 12
MAX_COLS = 3
SINGULAR_CONDITION = 1e12


def lad_bruteforce_oracle(a: np.ndarray, c: np.ndarray) -> LadSolution:
    """
    Exact minimizer of (1/m) sum_i |<a_i, x> - c_i| by subset enumeration.

    Args:
        a: Dense m x d matrix with m <= 12 and d <= 3
        c: Target of length m

    Returns:
        LadSolution with ``iterations`` set to the number of subsets evaluated

    Raises:
        ValueError: If the problem exceeds the combinatorial guard or shapes mismatch
        SolverError: If every d-row subset is singular
    """
    a = np.asarray(a, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"Oracle needs a 2-D matrix, got shape {a.shape}")
    m, d = a.shape
    if m > MAX_ROWS or d > MAX_COLS:
        raise ValueError(f"Oracle is limited to m <= {MAX_ROWS} and d <= {MAX_COLS}, got m={m}, d={d}")
    if c.shape != (m,):
        raise ValueError(f"Dimension mismatch: target must have length {m}, got shape {c.shape}")

    best_x = None
    best_objective = np.inf
    evaluated = 0

    for rows in combinations(range(m), d):
        sub = a[list(rows)]
        if np.linalg.cond(sub) >= SINGULAR_CONDITION:
            continue
        try:
            x = np.linalg.solve(sub, c[list(rows)])
        except np.linalg.LinAlgError:
            continue

        evaluated += 1
        objective = float(np.mean(np.abs(a @ x - c)))
        if objective < best_objective:
            best_x, best_objective = x, objective

    if best_x is None:
        raise SolverError(f"Every {d}-row subset of the {m}x{d} matrix is singular")

    logger.debug(f"Oracle evaluated {evaluated} subsets, optimum {best_objective:.6e}")
    return LadSolution(x=best_x, objective=best_objective, iterations=evaluated)
