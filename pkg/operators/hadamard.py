from typing import ClassVar

import numpy as np
from scipy.linalg import hadamard

from .base import BaseOperator


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def fwht(v: np.ndarray, normalize: bool = True) -> np.ndarray:
    """
    Fast Walsh-Hadamard transform along the last axis.

    Uses the Sylvester (natural) ordering, so the result equals
    ``scipy.linalg.hadamard(n) @ v`` (divided by sqrt(n) when normalized).
    Leading axes are treated as a batch.

    Args:
        v: Array whose last axis has power-of-two length n
        normalize: Scale by 1/sqrt(n) so the transform is orthogonal

    Returns:
        np.ndarray: Transformed copy of ``v``

    Raises:
        ValueError: If the last axis length is not a power of two
    """
    out = np.array(v, dtype=np.float64, order='C')
    if out.ndim == 0:
        raise ValueError("fwht expects at least a 1-D array")

    n = out.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"fwht length must be a power of two, got {n}")

    lead = out.shape[:-1]
    h = 1
    while h < n:
        # butterflies pair entries h apart inside blocks of length 2h
        view = out.reshape(lead + (n // (2 * h), 2, h))
        upper = view[..., 0, :].copy()
        lower = view[..., 1, :]
        view[..., 0, :] = upper + lower
        view[..., 1, :] = upper - lower
        h *= 2

    if normalize:
        out /= np.sqrt(n)
    return out


class HadamardOperator(BaseOperator):
    """
    Structured operator A_H = (I_k kron H_n) [S_1, ..., S_k]^T.

    H_n is the normalized Hadamard matrix and S_j are diagonal sign
    matrices, so block j of A_H x is H_n S_j x. Only the k sign diagonals are
    stored; products cost O(k n log n). Since every block is orthogonal,
    A_H^T A_H = k I.
    """

    kind: ClassVar[str] = 'hadamard'

    def __init__(self, sign_diagonals: np.ndarray):
        """
        Args:
            sign_diagonals: Array of shape (k, n) with entries in {-1, +1}

        Raises:
            ValueError: If n is not a power of two or an entry is not +-1
        """
        signs = np.array(sign_diagonals, dtype=np.int8, order='C')
        if signs.ndim == 1:
            signs = signs[np.newaxis, :]
        if signs.ndim != 2 or signs.shape[0] < 1:
            raise ValueError(f"Sign diagonals must have shape (k, n), got {np.shape(sign_diagonals)}")
        if not is_power_of_two(signs.shape[1]):
            raise ValueError(f"Hadamard length n must be a power of two, got {signs.shape[1]}")
        if not np.all(np.abs(signs) == 1):
            raise ValueError("Sign diagonal entries must be -1 or +1")

        signs.setflags(write=False)
        self.sign_diagonals = signs

    @property
    def n(self) -> int:
        return self.sign_diagonals.shape[1]

    @property
    def k(self) -> int:
        return self.sign_diagonals.shape[0]

    @property
    def m(self) -> int:
        return self.k * self.n

    @property
    def d(self) -> int:
        return self.n

    def _apply(self, x: np.ndarray) -> np.ndarray:
        blocks = self.sign_diagonals * x[np.newaxis, :]
        return fwht(blocks, normalize=True).reshape(-1)

    def _apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        # H_n is symmetric, so block j contributes S_j H_n y_j
        blocks = fwht(y.reshape(self.k, self.n), normalize=True)
        return np.sum(self.sign_diagonals * blocks, axis=0)

    def to_dense(self) -> np.ndarray:
        h = hadamard(self.n).astype(np.float64) / np.sqrt(self.n)
        return np.vstack([h * signs[np.newaxis, :] for signs in self.sign_diagonals])

    def frobenius_norm_sq(self) -> float:
        return float(self.k * self.n)

    def _payload(self) -> bytes:
        return self.sign_diagonals.tobytes()
