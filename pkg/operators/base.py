from abc import ABC, abstractmethod
from functools import cached_property
import hashlib
from typing import ClassVar

import numpy as np


class BaseOperator(ABC):
    """Base interface for linear measurement operators A: R^d -> R^m.

    Operators are immutable after construction and safe to share between
    concurrent readers.
    """

    kind: ClassVar[str]

    @property
    @abstractmethod
    def m(self) -> int:
        """Number of measurements (rows)."""

    @property
    @abstractmethod
    def d(self) -> int:
        """Signal dimension (columns)."""

    @abstractmethod
    def _apply(self, x: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def _apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def to_dense(self) -> np.ndarray:
        """
        Materialize the operator as an m x d array.

        Returns:
            np.ndarray: Dense matrix representation of the operator
        """

    @abstractmethod
    def frobenius_norm_sq(self) -> float:
        """Squared Frobenius norm of A."""

    @abstractmethod
    def _payload(self) -> bytes:
        """Bytes that identify the operator's contents."""

    @property
    def shape(self):
        return (self.m, self.d)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """
        Compute A x.

        Args:
            x: Vector of length d

        Returns:
            Vector of length m

        Raises:
            ValueError: If x does not have length d
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"Dimension mismatch: expected vector of length {self.d}, got shape {x.shape}")
        return self._apply(x)

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        """
        Compute A^T y.

        Args:
            y: Vector of length m

        Returns:
            Vector of length d

        Raises:
            ValueError: If y does not have length m
        """
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.m,):
            raise ValueError(f"Dimension mismatch: expected vector of length {self.m}, got shape {y.shape}")
        return self._apply_adjoint(y)

    @cached_property
    def fingerprint(self) -> str:
        """SHA-256 digest of the operator kind, shape and contents."""
        digest = hashlib.sha256()
        digest.update(f"{self.kind}:{self.m}x{self.d}".encode())
        digest.update(self._payload())
        return digest.hexdigest()

    def __repr__(self) -> str:
        return f"{type(self).__name__}(m={self.m}, d={self.d}, fingerprint={self.fingerprint[:12]})"
