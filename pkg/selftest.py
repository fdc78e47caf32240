"""Built-in checks: inner solvers against the brute-force oracle, rate constants and wedge frequencies."""
from dataclasses import dataclass, field
import logging
import math
from typing import List

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from operators import DenseOperator
from seeding import Stream, derive_rng, derive_seed
from solvers import (
    AdmmConfig,
    SignedLadProblem,
    SubgradientConfig,
    build_lp_cache,
    build_ls_cache,
    lad_bruteforce_oracle,
    solve_lad_admm,
    solve_lad_lp_admm,
    solve_lad_subgradient,
)
from theory import rate_constants, wedge_probability_mc

logger = logging.getLogger(__name__)

SELFTEST_COLUMNS = ['check', 'passed', 'value', 'threshold']
ORACLE_SHAPES = [(8, 2), (7, 3)]
ADMM_GAP = 1e-6
LP_GAP = 1e-4
SUBGRADIENT_GAP = 1e-3


class SelftestSpec(BaseModel):
    n_instances: int = Field(default=50, ge=1, description="Random oracle instances, alternating (8,2) and (7,3)")
    wedge_samples: int = Field(default=100000, ge=1000)
    rate_grid_points: int = Field(default=1000, ge=2)


@dataclass
class SelftestReport:
    rows: List[tuple] = field(default_factory=list)

    def record(self, check: str, value: float, threshold: float, passed: bool) -> None:
        self.rows.append((check, bool(passed), float(value), float(threshold)))
        log = logger.info if passed else logger.warning
        log(f"Selftest {check}: value={value:.3e} threshold={threshold:.3e} {'ok' if passed else 'FAILED'}")

    @property
    def passed(self) -> bool:
        return all(row[1] for row in self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=SELFTEST_COLUMNS)


def random_lad_instance(m: int, d: int, seed: int):
    """Gaussian m x d operator and a unit-norm target."""
    rng = derive_rng(seed, Stream.PROBE)
    op = DenseOperator(rng.standard_normal((m, d)))
    c = rng.standard_normal(m)
    return op, c / np.linalg.norm(c)


def check_oracle_equivalence(report: SelftestReport, n_instances: int, seed: int) -> None:
    """Largest objective excess over the oracle, per solver, over random tiny instances."""
    admm_cfg = AdmmConfig(max_iters=20000)
    lp_cfg = AdmmConfig(max_iters=50000)
    rsg_cfg = SubgradientConfig(restart_period=200, epochs=20)
    worst = {'admm_lad': 0.0, 'admm_lp': 0.0, 'subgradient': 0.0}

    for i in range(n_instances):
        m, d = ORACLE_SHAPES[i % len(ORACLE_SHAPES)]
        op, c = random_lad_instance(m, d, derive_seed(seed, i))
        best = lad_bruteforce_oracle(op.matrix, c).objective
        problem = SignedLadProblem(op, c, 1e-12)

        worst['admm_lad'] = max(worst['admm_lad'], solve_lad_admm(problem, build_ls_cache(op), admm_cfg).objective - best)
        worst['admm_lp'] = max(worst['admm_lp'], solve_lad_lp_admm(problem, build_lp_cache(op), lp_cfg).objective - best)
        worst['subgradient'] = max(worst['subgradient'], solve_lad_subgradient(problem, rsg_cfg).objective - best)

    for name, threshold in (('admm_lad', ADMM_GAP), ('admm_lp', LP_GAP), ('subgradient', SUBGRADIENT_GAP)):
        report.record(f"oracle_{name}", worst[name], threshold, worst[name] <= threshold)


def check_rate_constants(report: SelftestReport, points: int) -> None:
    grid = np.linspace(0.0, 0.25, points)
    constants = [rate_constants(eta) for eta in grid]
    nus = np.array([c.nu_eta for c in constants])

    min_step = float(np.min(np.diff(nus)))
    report.record('rate_nu_increasing', min_step, 0.0, min_step > 0)
    min_c = min(c.C_eta for c in constants)
    report.record('rate_C_positive', min_c, 0.0, min_c > 0)
    report.record('rate_nu_quarter', nus[-1], 0.9, nus[-1] < 0.9)


def check_wedges(report: SelftestReport, n_samples: int, seed: int) -> None:
    """|MC frequency - theta/pi| in units of the binomial standard deviation."""
    worst = 0.0
    for j, d in enumerate((2, 10, 100)):
        for l, theta in enumerate((0.08, math.pi / 6, math.pi / 4)):
            rng = derive_rng(seed, j, l, Stream.PROBE)
            x = rng.standard_normal(d)
            x /= np.linalg.norm(x)
            w = rng.standard_normal(d)
            w -= (w @ x) * x
            w /= np.linalg.norm(w)
            z = math.cos(theta) * x + math.sin(theta) * w

            p = theta / math.pi
            sigma = math.sqrt(p * (1 - p) / n_samples)
            estimate = wedge_probability_mc(x, z, n_samples, derive_seed(seed, j, l))
            worst = max(worst, abs(estimate - p) / sigma)

    report.record('wedge_frequency_sigmas', worst, 3.0, worst <= 3.0)


def run_selftest(spec: SelftestSpec, master_seed: int) -> SelftestReport:
    """
    Run the oracle-equivalence, rate-constant and wedge suites.

    Args:
        spec: Suite sizes
        master_seed: Master seed

    Returns:
        SelftestReport (``passed`` is False if any check failed)
    """
    report = SelftestReport()
    check_oracle_equivalence(report, spec.n_instances, derive_seed(master_seed, 0))
    check_rate_constants(report, spec.rate_grid_points)
    check_wedges(report, spec.wedge_samples, derive_seed(master_seed, 1))
    return report
