import os
import tempfile

import numpy as np
import pytest

from measurement import OutlierSpec, gaussian_ensemble, gaussian_signal, synthesize_instance


@pytest.fixture
def temp_dir():
    """
    Create a temporary directory for output files.

    Returns:
        str: Path to the temporary directory.
    """
    with tempfile.TemporaryDirectory() as tmpdirname:
        yield tmpdirname


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_instance():
    """
    A clean Gaussian instance with d=10, m=100.

    Returns:
        ProblemInstance: Instance without outliers.
    """
    op = gaussian_ensemble(10, 100, seed=11)
    return synthesize_instance(op, gaussian_signal(10, seed=11), OutlierSpec(), seed=11)


@pytest.fixture
def corrupted_instance():
    """
    A Gaussian instance with d=20, m=300 and 10% Cauchy outliers.

    Returns:
        ProblemInstance: Corrupted instance.
    """
    op = gaussian_ensemble(20, 300, seed=5)
    spec = OutlierSpec(fraction=0.1, value_model='cauchy')
    return synthesize_instance(op, gaussian_signal(20, seed=5), spec, seed=5)


@pytest.fixture
def image_file(temp_dir):
    """
    Write a 16x16 8-bit PGM with a bright square in the middle.

    Returns:
        str: Path to the image.
    """
    from PIL import Image

    pixels = np.zeros((16, 16), dtype=np.uint8)
    pixels[4:12, 4:12] = 200
    path = os.path.join(temp_dir, 'square.pgm')
    Image.fromarray(pixels).save(path)
    return path
