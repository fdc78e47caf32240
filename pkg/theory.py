"""Quantities of the local linear-convergence guarantee.

Within the basin dist(x_0, x_star) <= sin(2/25) ||x_star||, the iterates obey

    dist(x_{k+1}, x_star) <= nu_eta dist(x_k, x_star) + eps_k / C_eta

with

    c_0    = (4 / (25 pi)) (sqrt(2/pi) + sqrt(2 ln(25 e pi / 4))) + 1 / (625 sqrt(pi))
    C_eta  = (1 - 2 eta) sqrt(2/pi) - c_0 - (1 + sqrt(eta)) / 250
    nu_eta = c_0 / C_eta

Summing the recursion with eps_k <= eps_max gives
dist(x_k, x_star) <= nu_eta^k dist(x_0, x_star) + lambda_eta eps_max
where lambda_eta = 1 / (C_eta (1 - nu_eta)).
"""
from dataclasses import dataclass
import logging
import math
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator
from scipy.stats import linregress

from robust_am import IterateTrace
from seeding import Stream, derive_rng

logger = logging.getLogger(__name__)

ETA_MAX = 0.25
BASIN_ANGLE = 2.0 / 25.0
DEFAULT_RATE_FLOOR = 1e-12
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
C0 = (4.0 / (25.0 * math.pi)) * (SQRT_2_OVER_PI + math.sqrt(2.0 * math.log(25.0 * math.e * math.pi / 4.0))) \
    + 1.0 / (625.0 * math.sqrt(math.pi))

RATE_COLUMNS = ['eta', 'c0', 'C_eta', 'nu_eta', 'lambda_eta']


def parse_eta_range(text: str) -> List[float]:
    """
    Expand 'start:stop:step' into an inclusive grid, e.g. '0:0.25:0.01' -> 26 values.

    Raises:
        ValueError: On a malformed range or a non-positive step
    """
    parts = text.split(':')
    if len(parts) != 3:
        raise ValueError(f"Range must look like start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise ValueError(f"Range needs step > 0 and stop >= start, got {text!r}")
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 12) for i in range(count)]


class TheorySpec(BaseModel):
    etas: List[float] = Field(default_factory=lambda: parse_eta_range('0:0.25:0.01'))

    @field_validator('etas', mode='before')
    @classmethod
    def expand_range(cls, etas):
        if isinstance(etas, str):
            etas = [etas]
        if isinstance(etas, list) and len(etas) == 1 and isinstance(etas[0], str) and ':' in etas[0]:
            return parse_eta_range(etas[0])
        return etas

    @field_validator('etas')
    @classmethod
    def validate_etas(cls, etas):
        if not etas:
            raise ValueError("Theory sweep needs at least one eta")
        for eta in etas:
            _check_eta(eta)
        return etas


class RateConstants(BaseModel):
    eta: float = Field(ge=0.0, le=ETA_MAX)
    c0: float
    C_eta: float = Field(gt=0.0)
    nu_eta: float = Field(gt=0.0, lt=1.0)
    lambda_eta: float = Field(gt=0.0)


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not 0.0 <= eta <= ETA_MAX:
        raise ValueError(f"Outlier fraction must lie in [0, {ETA_MAX}], got {eta}")
    return eta


def rate_constants(eta: float) -> RateConstants:
    """
    Contraction and inexactness factors for outlier fraction eta.

    Args:
        eta: Outlier fraction in [0, 1/4]

    Returns:
        RateConstants
    """
    eta = _check_eta(eta)
    c_eta = (1.0 - 2.0 * eta) * SQRT_2_OVER_PI - C0 - (1.0 + math.sqrt(eta)) / 250.0
    nu = C0 / c_eta
    return RateConstants(eta=eta, c0=C0, C_eta=c_eta, nu_eta=nu, lambda_eta=1.0 / (c_eta * (1.0 - nu)))


def rate_derivative(eta: float) -> float:
    """Closed-form d nu_eta / d eta on (0, 1/4]; positive throughout."""
    eta = _check_eta(eta)
    if eta == 0.0:
        raise ValueError("d nu / d eta is unbounded at eta = 0")
    c_eta = rate_constants(eta).C_eta
    return C0 * (2.0 * SQRT_2_OVER_PI + 1.0 / (500.0 * math.sqrt(eta))) / c_eta ** 2


def basin_radius(norm_xstar: float) -> float:
    """sin(2/25) ||x_star||."""
    if norm_xstar < 0:
        raise ValueError(f"Norm must be nonnegative, got {norm_xstar}")
    return math.sin(BASIN_ANGLE) * norm_xstar


def error_bound(eta: float, k: int, dist0: float, eps_max: float = 0.0) -> float:
    """nu_eta^k dist0 + lambda_eta eps_max."""
    if k < 0:
        raise ValueError(f"Iteration count must be nonnegative, got {k}")
    constants = rate_constants(eta)
    return constants.nu_eta ** k * dist0 + constants.lambda_eta * eps_max


def rate_table(etas: Iterable[float]) -> pd.DataFrame:
    """One row of rate constants per eta, in the given order."""
    rows = [rate_constants(eta).model_dump() for eta in etas]
    return pd.DataFrame(rows, columns=RATE_COLUMNS)


def angle(x: np.ndarray, z: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    nx, nz = np.linalg.norm(x), np.linalg.norm(z)
    if nx == 0 or nz == 0:
        raise ValueError("Angle is undefined for a zero vector")
    return float(np.arccos(np.clip((x @ z) / (nx * nz), -1.0, 1.0)))


@dataclass(frozen=True)
class Wedge:
    """Directions whose inner-product signs with x and z disagree."""
    x: np.ndarray
    z: np.ndarray

    @property
    def theta(self) -> float:
        return angle(self.x, self.z)

    def contains(self, g: np.ndarray) -> np.ndarray:
        """Membership of each row of g (sign(0) = +1)."""
        return (g @ self.x >= 0) != (g @ self.z >= 0)


def wedge_probability_exact(x: np.ndarray, z: np.ndarray) -> float:
    """Gaussian measure of the wedge, angle(x, z) / pi in every dimension."""
    return angle(x, z) / math.pi


def wedge_probability_mc(x: np.ndarray, z: np.ndarray, n_samples: int, seed: int = 0,
                         block_size: int = 20000) -> float:
    """
    Monte-Carlo frequency of sign(<g, x>) != sign(<g, z>) for g ~ Normal(0, I).

    Samples are drawn in blocks, block j from its own derived stream, so the
    estimate does not depend on how blocks are scheduled.

    Args:
        x: Nonzero vector
        z: Nonzero vector of the same length
        n_samples: Number of Gaussian samples
        seed: Master seed
        block_size: Samples per block

    Returns:
        float: Fraction of samples inside the wedge
    """
    wedge = Wedge(np.asarray(x, dtype=np.float64), np.asarray(z, dtype=np.float64))
    if wedge.x.shape != wedge.z.shape:
        raise ValueError(f"Wedge vectors must have equal length, got {wedge.x.shape} and {wedge.z.shape}")
    if not np.any(wedge.x) or not np.any(wedge.z):
        raise ValueError("Wedge vectors must be nonzero")
    if n_samples < 1:
        raise ValueError(f"n_samples must be positive, got {n_samples}")

    hits = 0
    for block, start in enumerate(range(0, n_samples, block_size)):
        count = min(block_size, n_samples - start)
        g = derive_rng(seed, Stream.PROBE, block).standard_normal((count, wedge.x.size))
        hits += int(np.count_nonzero(wedge.contains(g)))

    return hits / n_samples


class LinearRateFit(BaseModel):
    rate: float
    r_squared: float
    slope: float
    intercept: float
    n_points: int


def certify_linear_rate(trace: Union[IterateTrace, Sequence[float]], window: int,
                        floor: Optional[float] = None) -> LinearRateFit:
    """
    Fit log dist(x_k) against k and report e^slope as the contraction factor.

    An IterateTrace contributes its initial distance as k = 0. Rows with
    dist > 10 * floor are eligible, and so is the first row at or below that
    level, clamped to it: a run that drops to the floor in one step still
    certifies, with a rate no faster than the one observed. The fit uses the
    first ``window`` eligible rows.

    Args:
        trace: IterateTrace, or distances for k = 1, 2, ...
        window: Number of rows in the fit (at least 2)
        floor: Distance floor; defaults to the trace's ``dist_floor``, else 1e-12

    Returns:
        LinearRateFit

    Raises:
        ValueError: If the first distance is already at the floor, or fewer
            than ``window`` rows are eligible
    """
    if window < 2:
        raise ValueError(f"Window must hold at least 2 rows, got {window}")

    if isinstance(trace, IterateTrace):
        ks = [float(row[0]) for row in trace.rows]
        dists = list(trace.dists)
        if trace.initial_dist is not None:
            ks.insert(0, 0.0)
            dists.insert(0, trace.initial_dist)
        if floor is None:
            floor = trace.dist_floor
    else:
        dists = [float(v) for v in trace]
        ks = [float(k) for k in range(1, len(dists) + 1)]
    floor = DEFAULT_RATE_FLOOR if floor is None else floor
    level = 10.0 * floor

    points = []
    for k, value in zip(ks, dists):
        if not np.isfinite(value):
            continue
        if value <= level:
            if not points:
                raise ValueError(f"Distance is already at the floor ({value:.1e} <= {level:.1e}) at k={k:g}")
            points.append((k, level))
            break
        points.append((k, value))

    if len(points) < window:
        raise ValueError(f"Need {window} rows with dist above {level:.1e}, trace has {len(points)}")

    points = points[:window]
    fit_ks = np.array([k for k, _ in points])
    log_dists = np.log([value for _, value in points])

    if np.ptp(log_dists) == 0:
        return LinearRateFit(rate=1.0, r_squared=1.0, slope=0.0, intercept=float(log_dists[0]), n_points=window)

    fit = linregress(fit_ks, log_dists)
    return LinearRateFit(
        rate=float(math.exp(fit.slope)),
        r_squared=float(fit.rvalue ** 2),
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        n_points=window
    )
