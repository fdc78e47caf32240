import numpy as np
import pytest
from pydantic import ValidationError

from measurement import (
    OutlierSpec,
    gaussian_ensemble,
    gaussian_signal,
    outlier_count,
    synthesize_instance,
)


@pytest.fixture
def operator():
    return gaussian_ensemble(20, 200, seed=3)


@pytest.fixture
def x_star():
    return gaussian_signal(20, seed=3)


def test_outlier_count_floors():
    assert outlier_count(100, 0.29) == 29
    assert outlier_count(10, 0.25) == 2
    assert outlier_count(7, 0.0) == 0


def test_clean_measurements(operator, x_star):
    instance = synthesize_instance(operator, x_star, OutlierSpec(), seed=1)

    np.testing.assert_allclose(instance.b, np.abs(operator.matrix @ x_star))
    assert instance.outlier_support.size == 0
    assert instance.inlier_mask().all()


def test_zero_valued_outliers(operator, x_star):
    instance = synthesize_instance(operator, x_star, OutlierSpec(fraction=0.3, value_model='zero'), seed=1)
    support = instance.outlier_support

    assert support.size == 60
    assert np.all(instance.b[support] == 0.0)
    clean = np.abs(operator.matrix @ x_star)
    mask = instance.inlier_mask()
    np.testing.assert_allclose(instance.b[mask], clean[mask])


def test_cauchy_outlier_median():
    op = gaussian_ensemble(2, 10000, seed=4)
    instance = synthesize_instance(op, np.ones(2), OutlierSpec(fraction=0.25, value_model='cauchy'), seed=4)
    values = instance.b[instance.outlier_support]

    assert values.size == 2500
    assert abs(np.median(np.abs(values)) - 1.0) <= 0.15


def test_uniform_scaled_width(operator, x_star):
    instance = synthesize_instance(operator, x_star, OutlierSpec(fraction=0.2, value_model='uniform_scaled'), seed=2)
    half_width = x_star.size * float(x_star @ x_star) / 2
    assert np.all(np.abs(instance.b[instance.outlier_support]) <= half_width)


def test_synthesis_is_deterministic(operator, x_star):
    spec = OutlierSpec(fraction=0.1, value_model='cauchy')
    first = synthesize_instance(operator, x_star, spec, seed=9)
    second = synthesize_instance(operator, x_star, spec, seed=9)

    np.testing.assert_array_equal(first.b, second.b)
    np.testing.assert_array_equal(first.outlier_support, second.outlier_support)


def test_fixed_support(operator, x_star):
    spec = OutlierSpec(fraction=0.01, support_rule='fixed_index_set', support=[7, 3])
    instance = synthesize_instance(operator, x_star, spec, seed=0)
    np.testing.assert_array_equal(instance.outlier_support, [3, 7])


def test_fixed_support_size_must_match(operator, x_star):
    spec = OutlierSpec(fraction=0.1, support_rule='fixed_index_set', support=[1, 2])
    with pytest.raises(ValueError, match="expected floor"):
        synthesize_instance(operator, x_star, spec, seed=0)


def test_fixed_rule_needs_support():
    with pytest.raises(ValidationError):
        OutlierSpec(fraction=0.1, support_rule='fixed_index_set')


def test_rejects_bad_ground_truth(operator):
    with pytest.raises(ValueError, match="length 20"):
        synthesize_instance(operator, np.ones(3), OutlierSpec(), seed=0)
    with pytest.raises(ValueError, match="non-finite"):
        synthesize_instance(operator, np.full(20, np.inf), OutlierSpec(), seed=0)
