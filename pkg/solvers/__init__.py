"""Inner solvers for the signed least-absolute-deviation subproblem."""

from .base import (
    TRACE_COLUMNS,
    BaseLadSolver,
    CacheMismatchError,
    CacheSizeError,
    DivergenceError,
    LadSolution,
    SignedLadProblem,
    SingularOperatorError,
    SolverError,
    lad_objective,
    sign,
)
from .caches import LpCache, LsCache, build_lp_cache, build_ls_cache
from .admm_lad import AdmmConfig, AdmmLadSolver, duality_gap, solve_lad_admm
from .admm_lp import AdmmLpSolver, solve_lad_lp_admm
from .subgradient import SubgradientConfig, SubgradientSolver, solve_lad_subgradient
from .oracle import lad_bruteforce_oracle

__all__ = [
    'TRACE_COLUMNS', 'BaseLadSolver', 'CacheMismatchError', 'CacheSizeError', 'DivergenceError',
    'LadSolution', 'SignedLadProblem', 'SingularOperatorError', 'SolverError', 'lad_objective', 'sign',
    'LpCache', 'LsCache', 'build_lp_cache', 'build_ls_cache',
    'AdmmConfig', 'AdmmLadSolver', 'duality_gap', 'solve_lad_admm',
    'AdmmLpSolver', 'solve_lad_lp_admm',
    'SubgradientConfig', 'SubgradientSolver', 'solve_lad_subgradient',
    'lad_bruteforce_oracle',
]
