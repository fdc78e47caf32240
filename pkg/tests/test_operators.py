import numpy as np
import pytest

from measurement import gaussian_ensemble, hadamard_ensemble
from operators import DenseOperator, HadamardOperator, fwht


def test_gaussian_ensemble_is_deterministic():
    first = gaussian_ensemble(2, 3, seed=7)
    second = gaussian_ensemble(2, 3, seed=7)

    assert first.shape == (3, 2)
    np.testing.assert_array_equal(first.matrix, second.matrix)
    assert first.fingerprint == second.fingerprint
    assert gaussian_ensemble(2, 3, seed=8).fingerprint != first.fingerprint


def test_gaussian_column_norms_concentrate():
    op = gaussian_ensemble(100, 800, seed=1)
    ratios = np.sum(op.matrix ** 2, axis=0) / op.m
    assert np.all((ratios >= 0.8) & (ratios <= 1.2))


def test_gaussian_entry_magnitude():
    op = gaussian_ensemble(1, 100000, seed=3)
    assert abs(np.mean(np.abs(op.matrix)) - np.sqrt(2 / np.pi)) < 0.01


def test_dense_matrix_is_read_only():
    op = DenseOperator(np.eye(2))
    with pytest.raises(ValueError):
        op.matrix[0, 0] = 5.0


def test_dense_identity_apply():
    op = DenseOperator(np.eye(2))
    np.testing.assert_array_equal(op.apply(np.array([3.0, -4.0])), [3.0, -4.0])


def test_dimension_mismatch_is_rejected():
    op = DenseOperator(np.ones((3, 2)))
    with pytest.raises(ValueError, match="Dimension mismatch"):
        op.apply(np.ones(3))
    with pytest.raises(ValueError, match="Dimension mismatch"):
        op.apply_adjoint(np.ones(2))


def test_dense_rejects_non_finite():
    with pytest.raises(ValueError, match="non-finite"):
        DenseOperator(np.array([[1.0, np.nan]]))


def test_fwht_of_unit_vector():
    e1 = np.zeros(8)
    e1[0] = 1.0
    np.testing.assert_allclose(fwht(e1), np.full(8, 1 / np.sqrt(8)))


def test_fwht_unnormalized_by_hand():
    np.testing.assert_array_equal(fwht(np.array([1.0, 2.0, 3.0, 4.0]), normalize=False), [10.0, -2.0, -4.0, 0.0])


def test_fwht_is_an_involution(rng):
    v = rng.standard_normal(64)
    np.testing.assert_allclose(fwht(fwht(v)), v, atol=1e-12)


def test_fwht_rejects_bad_length():
    with pytest.raises(ValueError, match="power of two"):
        fwht(np.ones(6))


def test_hadamard_scalar_case():
    op = hadamard_ensemble(1, 1, seed=0)
    dense = op.to_dense()
    assert dense.shape == (1, 1)
    assert abs(dense[0, 0]) == 1.0


def test_hadamard_block_is_orthogonal(rng):
    op = hadamard_ensemble(4, 1, seed=5)
    for _ in range(10):
        x = rng.standard_normal(4)
        assert abs(np.linalg.norm(op.apply(x)) - np.linalg.norm(x)) <= 1e-12


def test_hadamard_tight_frame(rng):
    op = hadamard_ensemble(256, 8, seed=2)
    dense = op.to_dense()
    for _ in range(20):
        x = rng.standard_normal(256)
        np.testing.assert_allclose(op.apply_adjoint(op.apply(x)), 8 * x, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(dense.T @ (dense @ x), 8 * x, rtol=1e-10, atol=1e-10)


def test_hadamard_first_column():
    op = HadamardOperator(np.ones((1, 4)))
    e1 = np.array([1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(op.apply(e1), [0.5, 0.5, 0.5, 0.5])


def test_hadamard_matches_dense(rng):
    op = hadamard_ensemble(16, 3, seed=9)
    x = rng.standard_normal(16)
    y = rng.standard_normal(48)
    dense = op.to_dense()

    np.testing.assert_allclose(op.apply(x), dense @ x, atol=1e-12)
    np.testing.assert_allclose(op.apply_adjoint(y), dense.T @ y, atol=1e-12)
    assert op.frobenius_norm_sq() == pytest.approx(np.sum(dense ** 2))


def test_hadamard_rejects_non_power_of_two():
    with pytest.raises(ValueError, match="power of two"):
        hadamard_ensemble(6, 2, seed=0)
    with pytest.raises(ValueError, match="-1 or \\+1"):
        HadamardOperator(np.array([[1, 0]]))
