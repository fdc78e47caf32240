from typing import ClassVar

import numpy as np

from .base import BaseOperator


class DenseOperator(BaseOperator):
    """Operator backed by an explicit m x d matrix (rows are the a_i)."""

    kind: ClassVar[str] = 'dense'

    def __init__(self, matrix: np.ndarray):
        """
        Wrap a dense measurement matrix.

        Args:
            matrix: Real 2-D array of shape (m, d)

        Raises:
            ValueError: If the matrix is not 2-D, empty, or has non-finite entries
        """
        matrix = np.array(matrix, dtype=np.float64, order='C')
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise ValueError(f"Measurement matrix must be a non-empty 2-D array, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("Measurement matrix contains non-finite entries")

        matrix.setflags(write=False)
        self.matrix = matrix

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    def _apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def _apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        return self.matrix.T @ y

    def to_dense(self) -> np.ndarray:
        return self.matrix

    def frobenius_norm_sq(self) -> float:
        return float(np.sum(self.matrix * self.matrix))

    def _payload(self) -> bytes:
        return self.matrix.tobytes()
