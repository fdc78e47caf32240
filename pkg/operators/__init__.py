"""Measurement operators: dense Gaussian matrices and structured Hadamard ensembles."""

from .base import BaseOperator
from .dense import DenseOperator
from .hadamard import HadamardOperator, fwht, is_power_of_two

__all__ = ['BaseOperator', 'DenseOperator', 'HadamardOperator', 'fwht', 'is_power_of_two']
