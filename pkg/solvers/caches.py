"""Factorizations reused across inner and outer iterations.

Both caches depend only on the operator, never on the signed target, so a
Robust-AM run builds each of them once.
"""
import logging
import time
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, qr, solve_triangular

from config import config
from operators import BaseOperator, HadamardOperator

from .base import CacheMismatchError, CacheSizeError, SingularOperatorError

logger = logging.getLogger(__name__)

RANK_THRESHOLD = 1e-10


class LsCache:
    """
    Least-squares solver for a fixed A: solve(r) = argmin_x ||A x - r||_2.

    Dense operators keep a column-pivoted economic QR factorization
    (cost O(d^2 m) once, O(m d) per solve). Hadamard operators satisfy
    A^T A = k I, so the pseudoinverse is A^T / k and nothing is factorized.
    """

    def __init__(self, operator: BaseOperator, q: Optional[np.ndarray] = None,
                 r: Optional[np.ndarray] = None, perm: Optional[np.ndarray] = None):
        self.operator = operator
        self.fingerprint = operator.fingerprint
        self._q = q
        self._r = r
        self._perm = perm

    @property
    def is_tight_frame(self) -> bool:
        return self._q is None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """
        Least-squares solution against the cached operator.

        Args:
            rhs: Vector of length m

        Returns:
            np.ndarray: Minimizer of ||A x - rhs|| of length d
        """
        rhs = np.asarray(rhs, dtype=np.float64)
        if self.is_tight_frame:
            return self.operator.apply_adjoint(rhs) / self.operator.k

        if rhs.shape != (self.operator.m,):
            raise ValueError(f"Dimension mismatch: expected vector of length {self.operator.m}, got shape {rhs.shape}")
        z = solve_triangular(self._r, self._q.T @ rhs, lower=False, check_finite=False)
        x = np.empty_like(z)
        x[self._perm] = z
        return x

    def project_range(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection of an m-vector onto range(A)."""
        return self.operator.apply(self.solve(v))

    def check(self, operator: BaseOperator) -> None:
        if operator.fingerprint != self.fingerprint:
            raise CacheMismatchError(
                f"Least-squares cache was built for operator {self.fingerprint[:12]}, "
                f"problem uses {operator.fingerprint[:12]}")


def build_ls_cache(op: BaseOperator) -> LsCache:
    """
    Factorize A once for repeated least-squares solves.

    Args:
        op: Measurement operator with m >= d

    Returns:
        LsCache

    Raises:
        SingularOperatorError: If A is rank deficient below 1e-10 ||A||
    """
    start = time.perf_counter()

    if isinstance(op, HadamardOperator):
        cache = LsCache(op)
    else:
        if op.m < op.d:
            raise SingularOperatorError(f"Least squares needs m >= d, got m={op.m}, d={op.d}")

        q, r, perm = qr(op.to_dense(), mode='economic', pivoting=True)
        diag = np.abs(np.diag(r))
        # pivoted QR puts the largest column norm first: |r_00| <= ||A||_2 <= sqrt(d) |r_00|
        scale = diag[0] if diag.size else 0.0
        if scale == 0.0 or diag.min() <= RANK_THRESHOLD * scale:
            raise SingularOperatorError(
                f"Operator is rank deficient: smallest pivot {diag.min():.3e} vs scale {scale:.3e}")
        cache = LsCache(op, q=q, r=r, perm=perm)

    logger.info(f"Built least-squares cache for {op.kind} operator {op.fingerprint[:12]} "
                f"(m={op.m}, d={op.d}) in {time.perf_counter() - start:.3f}s")
    return cache


class LpCache:
    """
    Cholesky factor of I_{2m} + B B^T for the standard-form LP of the signed
    LAD problem, with B = [[A, -I, 0, I], [A, I, -I, 0]] acting on
    w = [x; t; u; s] in R^{d+3m}.

    The matrix-inversion lemma gives
    (I + B^T B)^{-1} = I - B^T (I + B B^T)^{-1} B,
    so only the 2m x 2m factor is stored.
    """

    def __init__(self, operator: BaseOperator, matrix: np.ndarray, factor):
        self.operator = operator
        self.fingerprint = operator.fingerprint
        self.matrix = matrix
        self._factor = factor

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    @property
    def size(self) -> int:
        return self.d + 3 * self.m

    def split(self, w: np.ndarray):
        d, m = self.d, self.m
        return w[:d], w[d:d + m], w[d + m:d + 2 * m], w[d + 2 * m:]

    def apply_b(self, w: np.ndarray) -> np.ndarray:
        x, t, u, s = self.split(w)
        ax = self.matrix @ x
        return np.concatenate([ax - t + s, ax + t - u])

    def apply_bt(self, lam: np.ndarray) -> np.ndarray:
        top, bottom = lam[:self.m], lam[self.m:]
        return np.concatenate([self.matrix.T @ (top + bottom), bottom - top, -bottom, top])

    def apply_inverse(self, w: np.ndarray) -> np.ndarray:
        """Compute (I + B^T B)^{-1} w through the cached factor."""
        return w - self.apply_bt(cho_solve(self._factor, self.apply_b(w), check_finite=False))

    def check(self, operator: BaseOperator) -> None:
        if operator.fingerprint != self.fingerprint:
            raise CacheMismatchError(
                f"LP cache was built for operator {self.fingerprint[:12]}, "
                f"problem uses {operator.fingerprint[:12]}")


def build_lp_cache(op: BaseOperator, max_rows: Optional[int] = None) -> LpCache:
    """
    Factorize I_{2m} + B B^T once (O(m^3) time, O(m^2) memory).

    Args:
        op: Measurement operator; structured operators are materialized
        max_rows: Memory guard on m (defaults to ROBUST_AM_LP_MAX_ROWS)

    Returns:
        LpCache

    Raises:
        CacheSizeError: If m exceeds the guard
    """
    max_rows = config.lp_max_rows if max_rows is None else max_rows
    if op.m > max_rows:
        raise CacheSizeError(
            f"LP cache needs a {2 * op.m}x{2 * op.m} factorization (O(m^3)); "
            f"m={op.m} exceeds the configured cap of {max_rows} rows")

    start = time.perf_counter()
    a = np.asarray(op.to_dense(), dtype=np.float64)
    m = a.shape[0]
    gram = a @ a.T
    eye = np.eye(m)
    # I + B B^T = [[G + 3I, G - I], [G - I, G + 3I]] with G = A A^T
    system = np.block([[gram + 3 * eye, gram - eye], [gram - eye, gram + 3 * eye]])
    factor = cho_factor(system, lower=True, check_finite=False)

    logger.info(f"Built LP cache for {op.kind} operator {op.fingerprint[:12]} "
                f"(m={op.m}, d={op.d}, factor {2 * m}x{2 * m}) in {time.perf_counter() - start:.3f}s")
    return LpCache(op, a, factor)
