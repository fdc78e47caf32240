"""Starting points for Robust-AM: truncated spectral initialization and a
ground-truth perturbation used to isolate local convergence."""
import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import norm

from measurement import ProblemInstance
from seeding import Stream, derive_rng

logger = logging.getLogger(__name__)

# median of |N(0, 1)|
HALF_NORMAL_MEDIAN = float(norm.ppf(0.75))


class SpectralConfig(BaseModel):
    truncation_factor: float = Field(default=5.0, gt=0.0, description="Keep |b_i| <= gamma * median of the positive |b|")
    power_iters: int = Field(default=200, ge=1)
    tol: float = Field(default=1e-8, gt=0.0, description="Stop when 1 - |<v_new, v>| <= tol")


class SpectralInitializer:
    """
    Truncated spectral estimate r_hat * v of the ground truth.

    With mu the median of the nonzero |b_i|, r_hat = mu / 0.6745 and v is the
    leading eigenvector of Y = (1/m) sum_i b_i^2 a_i a_i^T 1{|b_i| <= gamma mu},
    found by power iteration with Y applied matrix-free. Zeroed measurements
    carry no weight and stay out of mu; negative corrupted values are
    truncated by magnitude. The eigenvector sign is arbitrary.

    Attributes:
        converged (bool): Whether the last run met the power-iteration tolerance
        iterations (int): Power iterations used by the last run
        norm_estimate (float): r_hat of the last run
    """

    def __init__(self, config: Optional[SpectralConfig] = None):
        self.config = config or SpectralConfig()
        self.converged = False
        self.iterations = 0
        self.norm_estimate = 0.0

    def run(self, instance: ProblemInstance, seed: int = 0) -> np.ndarray:
        """
        Compute the spectral starting point.

        Args:
            instance: Problem instance (only the operator and b are used)
            seed: Seed of the random power-iteration start

        Returns:
            np.ndarray: Vector of length d

        Raises:
            ValueError: If no measurement has a nonzero amplitude
        """
        op = instance.operator
        amplitudes = np.abs(np.asarray(instance.b, dtype=np.float64))
        positive = amplitudes[amplitudes > 0]
        if positive.size == 0:
            raise ValueError("All measurements were truncated away (every amplitude is zero)")
        median = float(np.median(positive))

        weights = np.where(amplitudes <= self.config.truncation_factor * median, amplitudes ** 2, 0.0)

        self.norm_estimate = median / HALF_NORMAL_MEDIAN

        v = derive_rng(seed, Stream.INIT).standard_normal(op.d)
        v /= np.linalg.norm(v)
        self.converged = False
        self.iterations = 0

        for iteration in range(1, self.config.power_iters + 1):
            self.iterations = iteration
            w = op.apply_adjoint(weights * op.apply(v)) / op.m
            w_norm = np.linalg.norm(w)
            if w_norm == 0:
                break
            w /= w_norm
            if 1.0 - abs(float(w @ v)) <= self.config.tol:
                v = w
                self.converged = True
                break
            v = w

        if not self.converged:
            logger.warning(f"Spectral power iteration did not converge in {self.config.power_iters} iterations")

        return self.norm_estimate * v


def spectral_init(instance: ProblemInstance, cfg: Optional[SpectralConfig] = None, seed: int = 0) -> np.ndarray:
    """Truncated spectral initialization; see SpectralInitializer."""
    return SpectralInitializer(cfg).run(instance, seed)


def oracle_init(x_star: np.ndarray, radius_fraction: float, seed: int = 0) -> np.ndarray:
    """
    Point at distance radius_fraction * ||x_star|| from x_star in a uniformly random direction.

    Args:
        x_star: Ground truth
        radius_fraction: Relative radius in (0, 1)
        seed: Seed of the direction stream

    Returns:
        np.ndarray: x_star + radius_fraction * ||x_star|| * u with ||u|| = 1
    """
    if not 0.0 < radius_fraction < 1.0:
        raise ValueError(f"radius_fraction must lie in (0, 1), got {radius_fraction}")
    x_star = np.asarray(x_star, dtype=np.float64)
    u = derive_rng(seed, Stream.INIT).standard_normal(x_star.size)
    u /= np.linalg.norm(u)
    return x_star + radius_fraction * np.linalg.norm(x_star) * u
