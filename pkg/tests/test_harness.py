import math

import numpy as np
import pandas as pd
import pytest

from config import config
from harness import (
    DIMENSION_GRID_COLUMNS,
    IMAGE_GRID_COLUMNS,
    MEDIAN_COLUMNS,
    PHASE_GRID_COLUMNS,
    RUNTIME_COLUMNS,
    ConvergenceSpec,
    DimensionGridSpec,
    ImageExperimentSpec,
    InitSpec,
    PhaseGridSpec,
    RuntimeSpec,
    SolveSpec,
    cell_success_rate,
    median_trace,
    parallel_map,
    run_convergence,
    run_dimension_grid,
    run_image_experiment,
    run_phase_grid,
    run_runtime_comparison,
    run_single,
)
from robust_am import IterateTrace, RobustAmConfig

ORACLE = InitSpec(method='oracle', radius_fraction=0.05)


def _square(x):
    return x * x


def test_cell_success_rate_needs_every_signal():
    assert cell_success_rate([[True, True], [True, False], [True, True]]) == pytest.approx(2 / 3)
    assert cell_success_rate([[False], [True]]) == 0.5
    with pytest.raises(ValueError):
        cell_success_rate([])


def test_parallel_map_keeps_order():
    assert parallel_map(_square, [3, 1, 2], parallelism=1) == [9, 1, 4]
    assert parallel_map(_square, [3, 1, 2], parallelism=2) == [9, 1, 4]


def test_median_trace_carries_stopped_traces_forward():
    short = IterateTrace(initial_dist=1.0)
    short.append(1, 0.1, 0.0, 1, 0.1, 0.0)
    long = IterateTrace(initial_dist=3.0)
    for k, d in enumerate([0.5, 0.2, 0.05], start=1):
        long.append(k, d, 0.0, 1, 0.1 * k, 0.0)

    frame = median_trace([short, long])
    assert list(frame.columns) == MEDIAN_COLUMNS
    assert list(frame['k']) == [0, 1, 2, 3]
    np.testing.assert_allclose(frame['median_dist'], [2.0, 0.3, 0.15, 0.075])


def test_median_trace_of_nothing():
    assert median_trace([]).empty


def test_run_single():
    spec = SolveSpec(d=10, m=100, eta=0.1, init=ORACLE, solver=RobustAmConfig(dist_tol=1e-6))
    result = run_single(spec, master_seed=1)

    assert result.recovery.status == 'success'
    assert result.dist <= 1e-6
    assert result.instance.outlier_support.size == 10


def test_phase_grid_shape_and_determinism():
    spec = PhaseGridSpec(d=5, ratios=[6.0, 8.0], etas=[0.0, 0.1], n_operator_sets=2, n_signals_per_set=2, init=ORACLE)
    serial = run_phase_grid(spec, master_seed=3, parallelism=1)
    parallel = run_phase_grid(spec, master_seed=3, parallelism=2)

    assert list(serial.frame.columns) == PHASE_GRID_COLUMNS
    assert len(serial.frame) == 4
    assert serial.frame['success_rate'].between(0.0, 1.0).all()
    pd.testing.assert_frame_equal(serial.frame, parallel.frame)
    assert serial.matrix().shape == (2, 2)


def test_dimension_grid_shape():
    spec = DimensionGridSpec(dims=[4], ms=[40, 60], eta=0.1, n_operator_sets=1, n_signals_per_set=2, init=ORACLE)
    grid = run_dimension_grid(spec, master_seed=0, parallelism=1)

    assert list(grid.frame.columns) == DIMENSION_GRID_COLUMNS
    assert list(grid.frame['m']) == [40, 60]
    assert (grid.row_axis, grid.col_axis) == ('d', 'm')


@pytest.mark.slow
def test_phase_grid_easy_and_impossible_corners():
    easy = PhaseGridSpec(d=50, ratios=[12.0], etas=[0.0], n_operator_sets=3, n_signals_per_set=3)
    assert run_phase_grid(easy, master_seed=0).frame['success_rate'].iloc[0] == 1.0

    square = PhaseGridSpec(d=50, ratios=[1.0], etas=[0.0], n_operator_sets=3, n_signals_per_set=3)
    assert run_phase_grid(square, master_seed=0).frame['success_rate'].iloc[0] == 0.0


def test_convergence_median():
    spec = ConvergenceSpec(d=8, m=96, eta=0.1, n_trials=3, init=ORACLE)
    result = run_convergence(spec, master_seed=2, parallelism=1)

    assert result.failures == 0
    assert len(result.traces) == 3
    assert result.median['k'].iloc[0] == 0
    assert result.median['median_dist'].iloc[-1] < result.median['median_dist'].iloc[0]


@pytest.mark.slow
def test_convergence_reaches_tolerance():
    spec = ConvergenceSpec(d=200, m=1500, eta=0.1, n_trials=3)
    result = run_convergence(spec, master_seed=0)
    reached = result.median[result.median['median_dist'] <= 1e-5]

    assert len(reached) and reached['k'].iloc[0] <= 30


def test_runtime_comparison_skips_oversized_lp_cache(monkeypatch):
    monkeypatch.setattr(config, 'lp_max_rows', 10)
    spec = RuntimeSpec(d=6, m=60, eta=0.1, value_models=['zero'], solvers=['admm_lad', 'admm_lp'],
                       target_dist=1e-6, init=ORACLE)
    result = run_runtime_comparison(spec, master_seed=0)
    table = result.table

    assert list(table.columns) == RUNTIME_COLUMNS
    assert list(table['solver']) == ['admm_lad', 'admm_lp']
    lad = table.iloc[0]
    assert lad['cache_build_s'] >= 0 and lad['time_to_tol_s'] >= 0
    assert math.isnan(table.iloc[1]['time_to_tol_s'])
    assert list(result.traces) == ['admm_lad/zero']


def test_image_experiment_on_synthetic_digits(tmp_path):
    spec = ImageExperimentSpec(synthetic=2, ks=[4], etas=[0.0, 0.1], init=ORACLE)
    grid = run_image_experiment(spec, master_seed=0, parallelism=1, work_dir=str(tmp_path))
    frame = grid.frame

    assert list(frame.columns) == IMAGE_GRID_COLUMNS
    assert list(frame['eta']) == [0.0, 0.1]
    assert (frame['n_images'] == 2).all()
    assert frame['success_rate'].between(0.0, 1.0).all()
    assert len(list((tmp_path / 'synthetic_digits').glob('*.pgm'))) == 2


@pytest.mark.slow
def test_image_recovery_needs_enough_modulations(tmp_path):
    spec = ImageExperimentSpec(synthetic=50, ks=[1, 8], etas=[0.1])
    frame = run_image_experiment(spec, master_seed=0, work_dir=str(tmp_path)).frame.set_index('k')

    assert (frame['n_images'] == 50).all()
    assert frame.loc[8, 'success_rate'] >= 0.9
    assert frame.loc[1, 'success_rate'] <= 0.1


def test_image_spec_needs_a_source():
    with pytest.raises(ValueError, match="image_dir or a positive synthetic count"):
        ImageExperimentSpec()
