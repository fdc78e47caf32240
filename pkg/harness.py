"""Monte-Carlo experiment protocols.

Every protocol splits its work into independent tasks (an operator set of a
grid cell, one convergence trial, one image of an image cell). Each task
derives its seeds from the master seed and its own indices, and results are
reduced in task order, so outputs do not depend on the worker count.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, TypeVar

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator, model_validator

from config import config
from initializers import SpectralConfig, oracle_init, spectral_init
from measurement import (
    OutlierSpec,
    ProblemInstance,
    ValueModel,
    gaussian_ensemble,
    gaussian_signal,
    hadamard_ensemble,
    synthesize_instance,
)
from robust_am import IterateTrace, RecoveryResult, RobustAmConfig, dist, make_solver, robust_am
from scanner import ImageScanner, generate_digit_images
from seeding import Stream, derive_seed
from solvers import BaseLadSolver, CacheSizeError, SolverError
from theory import BASIN_ANGLE

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

PHASE_GRID_COLUMNS = ['m_over_d', 'eta', 'success_rate', 'n_sets', 'n_signals', 'failures']
DIMENSION_GRID_COLUMNS = ['d', 'm', 'success_rate', 'n_sets', 'n_signals', 'failures']
IMAGE_GRID_COLUMNS = ['k', 'eta', 'success_rate', 'n_images', 'skipped', 'failures']
RUNTIME_COLUMNS = ['solver', 'value_model', 'trial', 'cache_build_s', 'time_to_tol_s', 'outer_iters']
MEDIAN_COLUMNS = ['k', 'median_dist']


def _grid_solver() -> RobustAmConfig:
    return RobustAmConfig(max_outer=50)


class InitSpec(BaseModel):
    """Starting point: truncated spectral estimate or a perturbation of the truth at a given radius."""
    method: Literal['spectral', 'oracle'] = Field(default='spectral')
    radius_fraction: float = Field(default=math.sin(BASIN_ANGLE), gt=0.0, lt=1.0)
    spectral: SpectralConfig = Field(default_factory=SpectralConfig)


class SolveSpec(BaseModel):
    d: int = Field(default=200, ge=1)
    m: int = Field(default=2000, ge=1)
    eta: float = Field(default=0.3, ge=0.0, lt=1.0)
    value_model: ValueModel = Field(default='zero')
    trial: int = Field(default=0, ge=0, description="Trial index used to derive the instance seeds")
    solver: RobustAmConfig = Field(default_factory=RobustAmConfig)
    init: InitSpec = Field(default_factory=InitSpec)


class PhaseGridSpec(BaseModel):
    d: int = Field(default=100, ge=1)
    ratios: List[float] = Field(default_factory=lambda: [float(r) for r in range(2, 13)])
    etas: List[float] = Field(default_factory=lambda: [round(0.05 * i, 2) for i in range(9)])
    value_model: ValueModel = Field(default='zero')
    n_operator_sets: int = Field(default=20, ge=1)
    n_signals_per_set: int = Field(default=30, ge=1)
    success_dist_tol: float = Field(default=1e-3, gt=0.0)
    solver: RobustAmConfig = Field(default_factory=_grid_solver)
    init: InitSpec = Field(default_factory=InitSpec)

    @field_validator('ratios')
    @classmethod
    def validate_ratios(cls, ratios):
        if not ratios or any(r <= 0 for r in ratios):
            raise ValueError(f"Ratios m/d must be a non-empty list of positive numbers, got {ratios}")
        return ratios

    @field_validator('etas')
    @classmethod
    def validate_etas(cls, etas):
        if not etas or any(not 0.0 <= e < 1.0 for e in etas):
            raise ValueError(f"Outlier fractions must be a non-empty list in [0, 1), got {etas}")
        return etas


class DimensionGridSpec(BaseModel):
    dims: List[int] = Field(default_factory=lambda: [10, 20, 30, 40, 50])
    ms: List[int] = Field(default_factory=lambda: [50, 100, 200, 300, 400, 500])
    eta: float = Field(default=0.25, ge=0.0, lt=1.0)
    value_model: ValueModel = Field(default='cauchy')
    n_operator_sets: int = Field(default=20, ge=1)
    n_signals_per_set: int = Field(default=30, ge=1)
    success_dist_tol: float = Field(default=1e-3, gt=0.0)
    solver: RobustAmConfig = Field(default_factory=_grid_solver)
    init: InitSpec = Field(default_factory=InitSpec)

    @field_validator('dims', 'ms')
    @classmethod
    def validate_sizes(cls, sizes):
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError(f"Sizes must be a non-empty list of positive integers, got {sizes}")
        return sizes


class ConvergenceSpec(BaseModel):
    d: int = Field(default=200, ge=1)
    m: int = Field(default=1500, ge=1)
    eta: float = Field(default=0.1, ge=0.0, lt=1.0)
    value_model: ValueModel = Field(default='zero')
    n_trials: int = Field(default=10, ge=1)
    solver: RobustAmConfig = Field(default_factory=_grid_solver)
    init: InitSpec = Field(default_factory=InitSpec)


class RuntimeSpec(BaseModel):
    d: int = Field(default=200, ge=1)
    m: int = Field(default=2000, ge=1)
    eta: float = Field(default=0.3, ge=0.0, lt=1.0)
    value_models: List[ValueModel] = Field(default_factory=lambda: ['zero', 'cauchy'])
    solvers: List[Literal['admm_lad', 'admm_lp', 'subgradient']] = Field(
        default_factory=lambda: ['admm_lad', 'admm_lp', 'subgradient'])
    n_trials: int = Field(default=1, ge=1)
    target_dist: float = Field(default=1e-5, gt=0.0)
    solver: RobustAmConfig = Field(default_factory=_grid_solver)
    init: InitSpec = Field(default_factory=InitSpec)


class ImageExperimentSpec(BaseModel):
    image_dir: Optional[str] = Field(default=None, description="Directory of PGM/PNG images")
    synthetic: int = Field(default=0, ge=0, description="Generate this many synthetic digits when no directory is given")
    ks: List[int] = Field(default_factory=lambda: list(range(1, 13)))
    etas: List[float] = Field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3])
    success_rel_tol: float = Field(default=1e-3, gt=0.0, description="Success when dist <= tol * ||x_star||")
    solver: RobustAmConfig = Field(default_factory=_grid_solver)
    init: InitSpec = Field(default_factory=InitSpec)

    @field_validator('ks')
    @classmethod
    def validate_ks(cls, ks):
        if not ks or any(k < 1 for k in ks):
            raise ValueError(f"Modulation counts must be a non-empty list of positive integers, got {ks}")
        return ks

    @model_validator(mode='after')
    def validate_source(self):
        if self.image_dir is None and self.synthetic == 0:
            raise ValueError("Image experiment needs image_dir or a positive synthetic count")
        return self


@dataclass
class PhaseGrid:
    """Success rates over a two-axis grid; ``frame`` holds one row per cell."""
    row_axis: str
    col_axis: str
    frame: pd.DataFrame

    def matrix(self) -> pd.DataFrame:
        """Success rates with ``row_axis`` values as rows and ``col_axis`` values as columns."""
        return self.frame.pivot(index=self.row_axis, columns=self.col_axis, values='success_rate')


@dataclass
class SolveResult:
    recovery: RecoveryResult
    dist: Optional[float]
    objective: float
    instance: ProblemInstance


@dataclass
class ConvergenceResult:
    traces: List[Optional[IterateTrace]]
    median: pd.DataFrame
    failures: int = 0


@dataclass
class RuntimeResult:
    table: pd.DataFrame
    traces: Dict[str, pd.DataFrame] = field(default_factory=dict)


def parallel_map(fn: Callable[[T], R], tasks: Sequence[T], parallelism: Optional[int] = None) -> List[R]:
    """Map ``fn`` over ``tasks`` in order, on a process pool when parallelism > 1."""
    parallelism = parallelism or config.parallelism
    if parallelism <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(parallelism, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def initial_point(instance: ProblemInstance, init: InitSpec, seed: int) -> np.ndarray:
    if init.method == 'oracle':
        if instance.x_star is None:
            raise ValueError("Oracle initialization needs the ground truth")
        return oracle_init(instance.x_star, init.radius_fraction, seed)
    return spectral_init(instance, init.spectral, seed)


def cell_success_rate(outcomes: Sequence[Sequence[bool]]) -> float:
    """
    Fraction of operator sets on which every signal was recovered.

    Args:
        outcomes: One sequence of per-signal successes per operator set

    Returns:
        float: Success rate in [0, 1]
    """
    if not outcomes:
        raise ValueError("A grid cell needs at least one operator set")
    return sum(bool(signals) and all(signals) for signals in outcomes) / len(outcomes)


def run_single(spec: SolveSpec, master_seed: int) -> SolveResult:
    """Synthesize one Gaussian instance, initialize and run Robust-AM on it."""
    seed = derive_seed(master_seed, Stream.TRIAL, spec.trial)
    op = gaussian_ensemble(spec.d, spec.m, seed)
    instance = synthesize_instance(op, gaussian_signal(spec.d, seed),
                                   OutlierSpec(fraction=spec.eta, value_model=spec.value_model), seed)
    x0 = initial_point(instance, spec.init, seed)
    result = robust_am(instance, x0, spec.solver)
    logger.info(f"Solved d={spec.d}, m={spec.m}, eta={spec.eta} ({spec.value_model}): "
                f"{result.status} after {result.outer_iterations} outer iterations")
    return SolveResult(
        recovery=result,
        dist=dist(result.x_hat, instance.x_star),
        objective=float(np.mean(np.abs(np.abs(op.apply(result.x_hat)) - instance.b))),
        instance=instance
    )


@dataclass(frozen=True)
class _SetTask:
    d: int
    m: int
    eta: float
    value_model: str
    n_signals: int
    tol: float
    solver: RobustAmConfig
    init: InitSpec
    seed: int


def _run_operator_set(task: _SetTask) -> Tuple[List[bool], int]:
    """Recover every signal of one operator set; stops at the first miss."""
    outcomes: List[bool] = []
    failures = 0
    cfg = task.solver if task.solver.dist_tol is not None else task.solver.model_copy(update={'dist_tol': task.tol})

    op = gaussian_ensemble(task.d, task.m, task.seed)
    solver: BaseLadSolver = make_solver(cfg)
    outliers = OutlierSpec(fraction=task.eta, value_model=task.value_model)

    for signal in range(task.n_signals):
        seed = derive_seed(task.seed, Stream.TRIAL, signal)
        try:
            instance = synthesize_instance(op, gaussian_signal(task.d, seed), outliers, seed)
            result = robust_am(instance, initial_point(instance, task.init, seed), cfg, solver)
            recovered = dist(result.x_hat, instance.x_star) <= task.tol
        except (SolverError, ValueError) as e:
            logger.warning(f"Trial failed (d={task.d}, m={task.m}, eta={task.eta}, signal {signal}): {e}")
            failures += 1
            recovered = False

        outcomes.append(recovered)
        if not recovered:
            break

    return outcomes, failures


def _run_grid(cells: List[Tuple[int, int, float]], value_model: str, n_sets: int, n_signals: int, tol: float,
              solver: RobustAmConfig, init: InitSpec, master_seed: int,
              parallelism: Optional[int]) -> List[Tuple[float, int]]:
    """Success rate and failure count per (d, m, eta) cell."""
    tasks = [
        _SetTask(d, m, eta, value_model, n_signals, tol, solver, init,
                 derive_seed(master_seed, Stream.TRIAL, cell, operator_set))
        for cell, (d, m, eta) in enumerate(cells)
        for operator_set in range(n_sets)
    ]
    results = parallel_map(_run_operator_set, tasks, parallelism)

    summary = []
    for cell, (d, m, eta) in enumerate(cells):
        chunk = results[cell * n_sets:(cell + 1) * n_sets]
        rate = cell_success_rate([outcomes for outcomes, _ in chunk])
        failures = sum(f for _, f in chunk)
        logger.info(f"Cell d={d}, m={m}, eta={eta}: success rate {rate:.2f} ({failures} failures)")
        summary.append((rate, failures))
    return summary


def run_phase_grid(spec: PhaseGridSpec, master_seed: int, parallelism: Optional[int] = None) -> PhaseGrid:
    """
    Success rate over (m/d, eta) with the all-signals-per-operator-set rule.

    Args:
        spec: Grid settings
        master_seed: Master seed
        parallelism: Worker processes (defaults to ROBUST_AM_PARALLELISM)

    Returns:
        PhaseGrid with one row per (ratio, eta) cell
    """
    logger.info(f"Phase grid: d={spec.d}, {len(spec.ratios)} ratios x {len(spec.etas)} etas, "
                f"{spec.n_operator_sets} sets x {spec.n_signals_per_set} signals")
    cells = [(spec.d, max(1, int(round(ratio * spec.d))), eta) for ratio in spec.ratios for eta in spec.etas]
    summary = _run_grid(cells, spec.value_model, spec.n_operator_sets, spec.n_signals_per_set,
                        spec.success_dist_tol, spec.solver, spec.init, master_seed, parallelism)

    rows = [
        (ratio, eta, rate, spec.n_operator_sets, spec.n_signals_per_set, failures)
        for (ratio, eta), (rate, failures) in zip([(r, e) for r in spec.ratios for e in spec.etas], summary)
    ]
    return PhaseGrid('m_over_d', 'eta', pd.DataFrame(rows, columns=PHASE_GRID_COLUMNS))


def run_dimension_grid(spec: DimensionGridSpec, master_seed: int, parallelism: Optional[int] = None) -> PhaseGrid:
    """Success rate over (d, m) at a fixed outlier fraction."""
    logger.info(f"Dimension grid: {len(spec.dims)} dims x {len(spec.ms)} sizes, eta={spec.eta}")
    pairs = [(d, m) for d in spec.dims for m in spec.ms]
    summary = _run_grid([(d, m, spec.eta) for d, m in pairs], spec.value_model, spec.n_operator_sets,
                        spec.n_signals_per_set, spec.success_dist_tol, spec.solver, spec.init,
                        master_seed, parallelism)

    rows = [
        (d, m, rate, spec.n_operator_sets, spec.n_signals_per_set, failures)
        for (d, m), (rate, failures) in zip(pairs, summary)
    ]
    return PhaseGrid('d', 'm', pd.DataFrame(rows, columns=DIMENSION_GRID_COLUMNS))


@dataclass(frozen=True)
class _TrialTask:
    spec: ConvergenceSpec
    seed: int


def _run_convergence_trial(task: _TrialTask) -> Optional[IterateTrace]:
    spec = task.spec
    try:
        op = gaussian_ensemble(spec.d, spec.m, task.seed)
        instance = synthesize_instance(op, gaussian_signal(spec.d, task.seed),
                                       OutlierSpec(fraction=spec.eta, value_model=spec.value_model), task.seed)
        cfg = spec.solver.model_copy(update={'record_trace': True})
        return robust_am(instance, initial_point(instance, spec.init, task.seed), cfg).trace
    except (SolverError, ValueError) as e:
        logger.warning(f"Convergence trial failed: {e}")
        return None


def median_trace(traces: Sequence[IterateTrace]) -> pd.DataFrame:
    """
    Per-iteration median of dist, k = 0 being the starting point.

    Traces that stopped early are carried forward at their last distance.
    """
    if not traces:
        return pd.DataFrame(columns=MEDIAN_COLUMNS)

    length = max(len(trace) for trace in traces) + 1
    table = np.empty((len(traces), length))
    for i, trace in enumerate(traces):
        dists = np.concatenate([[trace.initial_dist if trace.initial_dist is not None else np.nan], trace.dists])
        table[i, :dists.size] = dists
        table[i, dists.size:] = dists[-1]

    return pd.DataFrame({'k': np.arange(length), 'median_dist': np.median(table, axis=0)}, columns=MEDIAN_COLUMNS)


def run_convergence(spec: ConvergenceSpec, master_seed: int, parallelism: Optional[int] = None) -> ConvergenceResult:
    """
    Independent Robust-AM traces and their per-iteration median.

    Args:
        spec: Convergence settings
        master_seed: Master seed; trial i uses its own derived seed
        parallelism: Worker processes

    Returns:
        ConvergenceResult with None in place of failed trials
    """
    logger.info(f"Convergence: d={spec.d}, m={spec.m}, eta={spec.eta}, {spec.n_trials} trials")
    tasks = [_TrialTask(spec, derive_seed(master_seed, Stream.TRIAL, trial)) for trial in range(spec.n_trials)]
    traces = parallel_map(_run_convergence_trial, tasks, parallelism)
    finished = [trace for trace in traces if trace is not None]
    return ConvergenceResult(traces=traces, median=median_trace(finished), failures=len(traces) - len(finished))


def run_runtime_comparison(spec: RuntimeSpec, master_seed: int) -> RuntimeResult:
    """
    Wall-clock time to reach ``target_dist`` per inner solver and outlier model.

    Runs serially so the timings do not compete for cores. Synthesis and
    initialization are excluded from the timings and cache builds are
    reported separately. An LP cache above the row guard is logged and its
    row is left without timings.

    Args:
        spec: Benchmark settings
        master_seed: Master seed

    Returns:
        RuntimeResult with the table and dist-vs-time traces of trial 0
    """
    rows = []
    traces: Dict[str, pd.DataFrame] = {}

    for model_index, value_model in enumerate(spec.value_models):
        for trial in range(spec.n_trials):
            seed = derive_seed(master_seed, Stream.TRIAL, model_index, trial)
            op = gaussian_ensemble(spec.d, spec.m, seed)
            instance = synthesize_instance(op, gaussian_signal(spec.d, seed),
                                           OutlierSpec(fraction=spec.eta, value_model=value_model), seed)
            x0 = initial_point(instance, spec.init, seed)

            for name in spec.solvers:
                cfg = spec.solver.model_copy(update={'inner': name, 'dist_tol': spec.target_dist, 'record_trace': True})
                try:
                    result = robust_am(instance, x0, cfg)
                except CacheSizeError as e:
                    logger.warning(f"Skipping {name} on m={spec.m}: {e}")
                    rows.append((name, value_model, trial, math.nan, math.nan, 0))
                    continue

                frame = result.trace.to_frame()
                reached = frame[frame['dist'] <= spec.target_dist]
                time_to_tol = float(reached['wall_time_s'].iloc[0]) if len(reached) else math.nan
                rows.append((name, value_model, trial, result.cache_build_s, time_to_tol, result.outer_iterations))
                logger.info(f"{name} ({value_model}, trial {trial}): cache {result.cache_build_s:.3f}s, "
                            f"time to {spec.target_dist:g} {time_to_tol:.3f}s, {result.outer_iterations} outer")

                if trial == 0:
                    traces[f"{name}/{value_model}"] = frame[['wall_time_s', 'dist']]

    return RuntimeResult(table=pd.DataFrame(rows, columns=RUNTIME_COLUMNS), traces=traces)


@dataclass(frozen=True)
class _ImageTask:
    vector: np.ndarray
    k: int
    eta: float
    rel_tol: float
    solver: RobustAmConfig
    init: InitSpec
    seed: int


def _run_image_trial(task: _ImageTask) -> Tuple[bool, bool]:
    """(recovered, failed) for one image under one (k, eta) cell."""
    x_star = task.vector
    tol = task.rel_tol * float(np.linalg.norm(x_star))
    cfg = task.solver.model_copy(update={'dist_tol': tol})
    try:
        op = hadamard_ensemble(x_star.size, task.k, task.seed)
        instance = synthesize_instance(op, x_star, OutlierSpec(fraction=task.eta, value_model='zero'), task.seed)
        result = robust_am(instance, initial_point(instance, task.init, task.seed), cfg)
        return dist(result.x_hat, x_star) <= tol, False
    except (SolverError, ValueError) as e:
        logger.warning(f"Image trial failed (k={task.k}, eta={task.eta}): {e}")
        return False, True


def load_images(spec: ImageExperimentSpec, work_dir: Optional[str], master_seed: int) -> Tuple[List[Tuple[Path, np.ndarray]], int]:
    """Load (or generate, then load) the image corpus; returns (images, skipped count)."""
    image_dir = spec.image_dir
    if image_dir is None:
        image_dir = str(Path(work_dir or '.') / 'synthetic_digits')
        generate_digit_images(image_dir, spec.synthetic, master_seed)

    images, skipped = ImageScanner(image_dir).load_all()
    usable = []
    for path, vector in images:
        if not np.any(vector):
            logger.warning(f"Excluding degenerate all-zero image {path}")
            skipped += 1
            continue
        usable.append((path, vector))

    if not usable:
        raise FileNotFoundError(f"No usable images found in {image_dir}")
    return usable, skipped


def run_image_experiment(spec: ImageExperimentSpec, master_seed: int, parallelism: Optional[int] = None,
                         work_dir: Optional[str] = None) -> PhaseGrid:
    """
    Success rate over (k, eta) for Hadamard measurements of an image corpus.

    Args:
        spec: Image experiment settings
        master_seed: Master seed
        parallelism: Worker processes
        work_dir: Where synthetic images are written when requested

    Returns:
        PhaseGrid with one row per (k, eta) cell
    """
    images, skipped = load_images(spec, work_dir, master_seed)
    logger.info(f"Image experiment: {len(images)} images of length {images[0][1].size}, {skipped} skipped")

    cells = [(k, eta) for k in spec.ks for eta in spec.etas]
    tasks = [
        _ImageTask(vector, k, eta, spec.success_rel_tol, spec.solver, spec.init,
                   derive_seed(master_seed, Stream.TRIAL, cell, index))
        for cell, (k, eta) in enumerate(cells)
        for index, (_, vector) in enumerate(images)
    ]
    results = parallel_map(_run_image_trial, tasks, parallelism)

    rows = []
    n = len(images)
    for cell, (k, eta) in enumerate(cells):
        chunk = results[cell * n:(cell + 1) * n]
        rate = sum(recovered for recovered, _ in chunk) / n
        failures = sum(failed for _, failed in chunk)
        logger.info(f"Image cell k={k}, eta={eta}: success rate {rate:.2f}")
        rows.append((k, eta, rate, n, skipped, failures))

    return PhaseGrid('k', 'eta', pd.DataFrame(rows, columns=IMAGE_GRID_COLUMNS))
