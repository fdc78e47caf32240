import logging

import numpy as np
import pytest

from measurement import gaussian_ensemble, hadamard_ensemble
from operators import DenseOperator
from selftest import random_lad_instance
from solvers import (
    AdmmConfig,
    AdmmLadSolver,
    AdmmLpSolver,
    CacheMismatchError,
    CacheSizeError,
    SignedLadProblem,
    SingularOperatorError,
    SolverError,
    SubgradientConfig,
    SubgradientSolver,
    build_lp_cache,
    build_ls_cache,
    duality_gap,
    lad_bruteforce_oracle,
    lad_objective,
    sign,
    solve_lad_admm,
    solve_lad_lp_admm,
    solve_lad_subgradient,
)

logging.basicConfig(level=logging.INFO)


@pytest.fixture
def consistent_problem():
    """Full-rank 30 x 4 system with c = A x_hat."""
    op = gaussian_ensemble(4, 30, seed=21)
    x_hat = np.array([1.0, -2.0, 0.5, 3.0])
    return SignedLadProblem(op, op.apply(x_hat), tolerance=1e-10), x_hat


def test_sign_of_zero_is_positive():
    np.testing.assert_array_equal(sign(np.array([-2.0, 0.0, 3.0])), [-1.0, 1.0, 1.0])


def test_lad_objective_examples(rng):
    identity = DenseOperator(np.eye(2))
    assert lad_objective(identity, np.array([1.0, -1.0]), np.zeros(2)) == 1.0

    op = gaussian_ensemble(3, 12, seed=2)
    x = rng.standard_normal(3)
    c = rng.standard_normal(12)
    naive = sum(abs(op.matrix[i] @ x - c[i]) for i in range(12)) / 12
    assert lad_objective(op, c, x) == pytest.approx(naive, abs=1e-12)
    assert lad_objective(op, op.apply(x), x) == pytest.approx(0.0, abs=1e-12)


def test_problem_validation():
    op = DenseOperator(np.eye(3))
    with pytest.raises(ValueError, match="Target must have length 3"):
        SignedLadProblem(op, np.zeros(2), 1e-6)
    with pytest.raises(ValueError, match="Tolerance must be positive"):
        SignedLadProblem(op, np.zeros(3), 0.0)
    with pytest.raises(ValueError, match="Warm start"):
        SignedLadProblem(op, np.zeros(3), 1e-6, warm_start=np.zeros(2))


def test_ls_cache_identity():
    cache = build_ls_cache(DenseOperator(np.eye(3)))
    r = np.array([1.0, -2.0, 5.0])
    np.testing.assert_allclose(cache.solve(r), r)


def test_ls_cache_matches_normal_equations(rng):
    a = rng.standard_normal((20, 5))
    r = rng.standard_normal(20)
    cache = build_ls_cache(DenseOperator(a))

    expected = np.linalg.inv(a.T @ a) @ a.T @ r
    np.testing.assert_allclose(cache.solve(r), expected, atol=1e-8)


def test_ls_cache_detects_rank_deficiency(rng):
    column = rng.standard_normal((10, 1))
    a = np.hstack([column, column, rng.standard_normal((10, 1))])
    with pytest.raises(SingularOperatorError):
        build_ls_cache(DenseOperator(a))


def test_ls_cache_needs_tall_operator():
    with pytest.raises(SingularOperatorError, match="m >= d"):
        build_ls_cache(DenseOperator(np.ones((2, 3))))


def test_ls_cache_for_hadamard_skips_factorization(rng):
    op = hadamard_ensemble(32, 3, seed=4)
    cache = build_ls_cache(op)
    x = rng.standard_normal(32)

    assert cache.is_tight_frame
    np.testing.assert_allclose(cache.solve(op.apply(x)), x, atol=1e-12)


def test_admm_solves_consistent_system(consistent_problem):
    problem, x_hat = consistent_problem
    solution = solve_lad_admm(problem, build_ls_cache(problem.operator))

    assert solution.status == 'converged'
    assert solution.objective <= 1e-8
    assert np.linalg.norm(solution.x - x_hat) <= 1e-6


def test_admm_matches_oracle():
    cfg = AdmmConfig(max_iters=20000)
    for seed in range(5):
        op, c = random_lad_instance(8, 2, seed)
        best = lad_bruteforce_oracle(op.matrix, c).objective
        solution = solve_lad_admm(SignedLadProblem(op, c, 1e-12), build_ls_cache(op), cfg)
        assert solution.objective - best <= 1e-6


def test_admm_with_huge_outlier_matches_oracle(rng):
    op = DenseOperator(rng.standard_normal((7, 3)))
    c = rng.standard_normal(7)
    c[2] = 1e6
    best = lad_bruteforce_oracle(op.matrix, c).objective
    solution = solve_lad_admm(SignedLadProblem(op, c, 1e-12), build_ls_cache(op), AdmmConfig(max_iters=20000))

    assert solution.objective - best <= 1e-6 * best


def test_admm_records_trace(consistent_problem):
    problem, _ = consistent_problem
    cfg = AdmmConfig(record_trace=True, max_iters=5)
    solution = solve_lad_admm(problem, build_ls_cache(problem.operator), cfg)

    frame = solution.trace_frame()
    assert list(frame.columns) == ['inner_iter', 'objective', 'primal_res', 'dual_res', 'rho']
    assert len(frame) == solution.iterations


def test_admm_reports_max_iters(rng):
    op, c = random_lad_instance(12, 3, seed=8)
    solution = solve_lad_admm(SignedLadProblem(op, c, 1e-14), build_ls_cache(op), AdmmConfig(max_iters=2))

    assert solution.status == 'max_iters'
    assert solution.iterations == 2
    assert solution.gap is not None and solution.gap >= -1e-9


def test_duality_gap_bounds_suboptimality(rng):
    op, c = random_lad_instance(8, 2, seed=21)
    cache = build_ls_cache(op)
    best = np.sum(np.abs(op.matrix @ lad_bruteforce_oracle(op.matrix, c).x - c))

    for _ in range(5):
        x = rng.standard_normal(2)
        ax = op.apply(x)
        gap = duality_gap(op, cache, c, ax, 3.0 * rng.standard_normal(8))
        assert gap >= np.sum(np.abs(ax - c)) - best - 1e-9


def test_cache_mismatch_is_rejected(consistent_problem):
    problem, _ = consistent_problem
    other = build_ls_cache(gaussian_ensemble(4, 30, seed=22))
    with pytest.raises(CacheMismatchError):
        solve_lad_admm(problem, other)
    with pytest.raises(CacheMismatchError):
        AdmmLadSolver(cache=other).solve(problem)


def test_lp_cache_inverse_tiny():
    op = DenseOperator(np.array([[2.0]]))
    cache = build_lp_cache(op)
    assert cache.size == 4

    b = np.column_stack([cache.apply_b(e) for e in np.eye(4)])
    system = np.eye(4) + b.T @ b
    product = np.column_stack([cache.apply_inverse(col) for col in system.T])
    np.testing.assert_allclose(product, np.eye(4), atol=1e-12)


def test_lp_cache_matches_dense_inverse(rng):
    op = DenseOperator(rng.standard_normal((10, 3)))
    cache = build_lp_cache(op)
    size = cache.size
    assert size == 33

    b = np.column_stack([cache.apply_b(e) for e in np.eye(size)])
    dense_inverse = np.linalg.inv(np.eye(size) + b.T @ b)
    w = rng.standard_normal(size)
    np.testing.assert_allclose(cache.apply_inverse(w), dense_inverse @ w, atol=1e-8)


def test_lp_adjoint_is_transpose(rng):
    cache = build_lp_cache(DenseOperator(rng.standard_normal((6, 2))))
    w = rng.standard_normal(cache.size)
    lam = rng.standard_normal(12)
    assert cache.apply_b(w) @ lam == pytest.approx(w @ cache.apply_bt(lam))


def test_lp_cache_row_guard():
    with pytest.raises(CacheSizeError, match="exceeds the configured cap"):
        build_lp_cache(gaussian_ensemble(2, 50, seed=0), max_rows=10)


def test_lp_admm_solves_consistent_system():
    op = gaussian_ensemble(3, 20, seed=31)
    x_hat = np.array([0.5, -1.0, 2.0])
    problem = SignedLadProblem(op, op.apply(x_hat), tolerance=1e-10)
    solution = solve_lad_lp_admm(problem, build_lp_cache(op), AdmmConfig(max_iters=50000))

    assert solution.objective <= 1e-6


@pytest.mark.slow
def test_lp_admm_matches_oracle():
    cfg = AdmmConfig(max_iters=50000)
    for seed in range(3):
        op, c = random_lad_instance(8, 2, seed)
        best = lad_bruteforce_oracle(op.matrix, c).objective
        solution = solve_lad_lp_admm(SignedLadProblem(op, c, 1e-12), build_lp_cache(op), cfg)
        assert solution.objective - best <= 1e-4


@pytest.mark.slow
def test_lp_admm_agrees_with_admm_lad():
    lad_cfg = AdmmConfig(max_iters=20000)
    lp_cfg = AdmmConfig(max_iters=50000)
    for seed in range(20):
        op, c = random_lad_instance(50, 5, seed)
        problem = SignedLadProblem(op, c, 1e-12)
        lad = solve_lad_admm(problem, build_ls_cache(op), lad_cfg)
        lp = solve_lad_lp_admm(problem, build_lp_cache(op), lp_cfg)
        assert abs(lp.objective - lad.objective) <= 1e-4, seed


def test_lp_solver_builds_cache_once(consistent_problem):
    problem, _ = consistent_problem
    solver = AdmmLpSolver(AdmmConfig(max_iters=50))
    cache = solver.prepare(problem.operator)
    solver.solve(problem)
    assert solver.cache is cache


def test_subgradient_stays_at_optimum():
    op = gaussian_ensemble(3, 10, seed=1)
    problem = SignedLadProblem(op, np.zeros(10), 1e-8, warm_start=np.zeros(3))
    solution = solve_lad_subgradient(problem)

    np.testing.assert_array_equal(solution.x, np.zeros(3))
    assert solution.objective == 0.0
    assert solution.status == 'converged'


def test_subgradient_matches_oracle():
    cfg = SubgradientConfig(restart_period=200, epochs=20)
    for seed in range(5):
        op, c = random_lad_instance(8, 2, seed)
        best = lad_bruteforce_oracle(op.matrix, c).objective
        solution = solve_lad_subgradient(SignedLadProblem(op, c, 1e-12), cfg)
        assert solution.objective - best <= 1e-3


def test_subgradient_never_worse_than_start():
    op, c = random_lad_instance(12, 3, seed=5)
    x0 = np.array([0.3, -0.2, 0.1])
    problem = SignedLadProblem(op, c, 1e-8, warm_start=x0)
    solution = SubgradientSolver(SubgradientConfig(restart_period=5, epochs=2, record_trace=True)).solve(problem)

    assert solution.objective <= lad_objective(op, c, x0)
    assert solution.iterations == 10
    assert [row[0] for row in solution.trace] == [5, 10]


def test_oracle_examples():
    ones = np.ones((3, 1))

    low = lad_bruteforce_oracle(ones, np.array([0.0, 0.0, 10.0]))
    np.testing.assert_allclose(low.x, [0.0])
    assert low.objective == pytest.approx(10 / 3)

    mid = lad_bruteforce_oracle(ones, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(mid.x, [2.0])
    assert mid.objective == pytest.approx(2 / 3)


def test_oracle_square_system(rng):
    a = rng.standard_normal((3, 3))
    c = rng.standard_normal(3)
    solution = lad_bruteforce_oracle(a, c)

    np.testing.assert_allclose(solution.x, np.linalg.solve(a, c), atol=1e-10)
    assert solution.objective == pytest.approx(0.0, abs=1e-12)
    assert solution.iterations == 1


def test_oracle_guards():
    with pytest.raises(ValueError, match="limited to"):
        lad_bruteforce_oracle(np.ones((13, 1)), np.ones(13))
    with pytest.raises(SolverError, match="singular"):
        lad_bruteforce_oracle(np.zeros((4, 2)), np.ones(4))


def test_subgradient_epoch_objective_never_increases():
    op, c = random_lad_instance(40, 4, seed=17)
    cfg = SubgradientConfig(restart_period=25, epochs=12, record_trace=True, early_stop=False)
    solution = solve_lad_subgradient(SignedLadProblem(op, c, 1e-12), cfg)

    objectives = [row[1] for row in solution.trace]
    assert len(objectives) == 12
    assert np.all(np.diff(objectives) <= 0)
    assert solution.objective == pytest.approx(objectives[-1])
