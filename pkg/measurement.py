"""Measurement ensembles and corrupted amplitude measurements.

Clean measurements are b_i = |<a_i, x_star>|; a fraction eta of them is
replaced by outlier values xi_i drawn from one of three value models.
"""
from dataclasses import dataclass, field
import logging
import math
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from operators import BaseOperator, DenseOperator, HadamardOperator, is_power_of_two
from seeding import Stream, derive_rng

logger = logging.getLogger(__name__)

ValueModel = Literal['cauchy', 'uniform_scaled', 'zero']
SupportRule = Literal['uniform_random', 'fixed_index_set']


def outlier_count(m: int, fraction: float) -> int:
    """Number of corrupted measurements, floor(eta * m).

    A 1e-9 slack keeps products such as 0.29 * 100 from flooring to 28.
    """
    return int(math.floor(fraction * m + 1e-9))


def gaussian_ensemble(d: int, m: int, seed: int) -> DenseOperator:
    """
    Draw an m x d matrix with i.i.d. standard normal entries.

    Args:
        d: Signal dimension
        m: Number of measurements
        seed: Seed of the operator stream

    Returns:
        DenseOperator: Deterministic in ``seed``
    """
    if d < 1 or m < 1:
        raise ValueError(f"Gaussian ensemble needs d >= 1 and m >= 1, got d={d}, m={m}")
    rng = derive_rng(seed, Stream.OPERATOR)
    return DenseOperator(rng.standard_normal((m, d)))


def hadamard_ensemble(n: int, k: int, seed: int) -> HadamardOperator:
    """
    Draw k random sign modulations of the normalized n x n Hadamard matrix.

    Args:
        n: Signal length, a power of two
        k: Number of modulations (m = k n)
        seed: Seed of the operator stream

    Returns:
        HadamardOperator

    Raises:
        ValueError: If n is not a power of two or k < 1
    """
    if not is_power_of_two(n):
        raise ValueError(f"Hadamard length n must be a power of two, got {n}")
    if k < 1:
        raise ValueError(f"Number of modulations k must be positive, got {k}")
    rng = derive_rng(seed, Stream.OPERATOR)
    signs = 2 * rng.integers(0, 2, size=(k, n), dtype=np.int8) - 1
    return HadamardOperator(signs)


class OutlierSpec(BaseModel):
    """
    Outlier model: how many measurements are corrupted, where, and with which values.
    """
    fraction: float = Field(default=0.0, ge=0.0, lt=1.0, description="Outlier fraction eta")
    support_rule: SupportRule = Field(default='uniform_random')
    value_model: ValueModel = Field(default='zero')
    cauchy_scale: float = Field(default=1.0, gt=0.0, description="Scale of the Cauchy model (median 0)")
    uniform_half_width: Optional[float] = Field(
        default=None, gt=0.0,
        description="Half width of the uniform model; defaults to d * ||x_star||^2 / 2")
    support: Optional[List[int]] = Field(default=None, description="Indices used by fixed_index_set")

    @field_validator('support')
    @classmethod
    def validate_support(cls, support):
        if support is None:
            return support
        if len(set(support)) != len(support):
            raise ValueError("Fixed outlier support contains duplicate indices")
        if any(i < 0 for i in support):
            raise ValueError("Fixed outlier support indices must be non-negative")
        return sorted(support)

    @model_validator(mode='after')
    def validate_rule(self):
        if self.support_rule == 'fixed_index_set' and self.support is None:
            raise ValueError("support_rule 'fixed_index_set' requires an explicit support")
        return self


@dataclass(frozen=True)
class ProblemInstance:
    """Operator, corrupted amplitudes and (when known) the ground truth."""
    operator: BaseOperator
    b: np.ndarray
    x_star: Optional[np.ndarray]
    outlier_support: np.ndarray
    eta: float = 0.0
    value_model: str = 'zero'
    seed_manifest: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.b.shape != (self.operator.m,):
            raise ValueError(f"Measurements must have length {self.operator.m}, got {self.b.shape}")
        if self.x_star is not None and self.x_star.shape != (self.operator.d,):
            raise ValueError(f"Ground truth must have length {self.operator.d}, got {self.x_star.shape}")

    @property
    def m(self) -> int:
        return self.operator.m

    @property
    def d(self) -> int:
        return self.operator.d

    def inlier_mask(self) -> np.ndarray:
        mask = np.ones(self.m, dtype=bool)
        mask[self.outlier_support] = False
        return mask


def draw_outlier_values(spec: OutlierSpec, count: int, x_star: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Draw outlier values xi_i for one instance.

    Args:
        spec: Outlier model
        count: Number of values
        x_star: Ground truth, sets the uniform model's width
        rng: Outlier value stream

    Returns:
        np.ndarray: ``count`` outlier values
    """
    if spec.value_model == 'cauchy':
        return spec.cauchy_scale * rng.standard_cauchy(count)
    if spec.value_model == 'uniform_scaled':
        half_width = spec.uniform_half_width
        if half_width is None:
            half_width = x_star.size * float(x_star @ x_star) / 2.0
        if half_width <= 0:
            return np.zeros(count)
        return rng.uniform(-half_width, half_width, size=count)
    return np.zeros(count)


def synthesize_instance(op: BaseOperator, x_star: np.ndarray, spec: OutlierSpec, seed: int) -> ProblemInstance:
    """
    Build corrupted amplitude measurements b for a ground truth.

    Args:
        op: Measurement operator
        x_star: Ground truth of length d
        spec: Outlier model
        seed: Instance seed; support and values use separate derived streams

    Returns:
        ProblemInstance

    Raises:
        ValueError: If x_star is not finite or the outlier count reaches m
    """
    x_star = np.array(x_star, dtype=np.float64)
    if x_star.shape != (op.d,):
        raise ValueError(f"Ground truth must have length {op.d}, got shape {x_star.shape}")
    if not np.all(np.isfinite(x_star)):
        raise ValueError("Ground truth contains non-finite entries")

    m = op.m
    count = outlier_count(m, spec.fraction)
    if count >= m:
        raise ValueError(f"Outlier count {count} must be smaller than m={m}")

    if spec.support_rule == 'fixed_index_set':
        support = np.array(spec.support, dtype=np.int64)
        if support.size != count:
            raise ValueError(f"Fixed support has {support.size} indices, expected floor(eta*m) = {count}")
        if support.size and support.max() >= m:
            raise ValueError(f"Fixed support index {support.max()} out of range for m={m}")
    else:
        support = np.sort(derive_rng(seed, Stream.SUPPORT).choice(m, size=count, replace=False)).astype(np.int64)

    b = np.abs(op.apply(x_star))
    values = draw_outlier_values(spec, count, x_star, derive_rng(seed, Stream.OUTLIER_VALUES))
    b[support] = values

    logger.debug(f"Synthesized instance m={m}, d={op.d}, outliers={count} ({spec.value_model})")

    return ProblemInstance(
        operator=op,
        b=b,
        x_star=x_star,
        outlier_support=support,
        eta=spec.fraction,
        value_model=spec.value_model,
        seed_manifest={'instance_seed': int(seed), 'support_rule': spec.support_rule}
    )


def gaussian_signal(d: int, seed: int) -> np.ndarray:
    """Ground truth x_star ~ Normal(0, I_d) from the signal stream of ``seed``."""
    return derive_rng(seed, Stream.SIGNAL).standard_normal(d)
