"""Command-line front end: ``robust-am <subcommand> [flags]``.

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 solver failure.
Failures print one JSON line {"error", "code", "message"} on stderr.
"""
import argparse
import json
import logging
from pathlib import Path
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from config import config
from harness import (
    run_convergence,
    run_dimension_grid,
    run_image_experiment,
    run_phase_grid,
    run_runtime_comparison,
    run_single,
)
from run_config import (
    ConfigError,
    RunConfig,
    build_run_config,
    read_run_config_data,
    serialize_run_config,
)
from selftest import run_selftest
from solvers import SolverError
from store import PIXEL_SCALING, ResultStore, save_instance
from theory import rate_table

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SOLVER = 4


class ConfigArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as ConfigError instead of exiting."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def _list(text: str) -> List[str]:
    return [item.strip() for item in text.split(',') if item.strip()]


# flag dest -> key path inside the experiment spec
OVERRIDES: Dict[str, Tuple[str, ...]] = {
    'd': ('d',), 'm': ('m',), 'eta': ('eta',), 'model': ('value_model',), 'trial': ('trial',),
    'ratios': ('ratios',), 'etas': ('etas',), 'dims': ('dims',), 'ms': ('ms',),
    'sets': ('n_operator_sets',), 'signals': ('n_signals_per_set',), 'tol': ('success_dist_tol',),
    'trials': ('n_trials',), 'models': ('value_models',), 'solvers': ('solvers',), 'target': ('target_dist',),
    'images': ('image_dir',), 'synthetic': ('synthetic',), 'ks': ('ks',), 'rel_tol': ('success_rel_tol',),
    'instances': ('n_instances',), 'wedge_samples': ('wedge_samples',),
    'inner': ('solver', 'inner'), 'max_outer': ('solver', 'max_outer'),
    'init': ('init', 'method'), 'radius': ('init', 'radius_fraction'),
}


def _add_solver_flags(parser: argparse.ArgumentParser, init: bool = True) -> None:
    parser.add_argument('--inner', choices=['admm_lad', 'admm_lp', 'subgradient'], help="Inner LAD solver")
    parser.add_argument('--max-outer', dest='max_outer', type=int, help="Maximum outer iterations")
    if init:
        parser.add_argument('--init', choices=['spectral', 'oracle'], help="Initialization method")
        parser.add_argument('--radius', type=float, help="Oracle initialization radius (fraction of ||x_star||)")


def build_parser() -> argparse.ArgumentParser:
    parser = ConfigArgumentParser(prog='robust-am', description="Robust phase retrieval by LAD alternating minimization")
    common = ConfigArgumentParser(add_help=False)
    common.add_argument('--config', help="Run config file")
    common.add_argument('--seed', type=int, help="Master seed (unsigned 64-bit)")
    common.add_argument('--out', help="Output directory (or a .csv path for the main table)")
    common.add_argument('--parallelism', type=int, help="Worker processes")
    common.add_argument('--log-level', dest='log_level', help="Logging level name")

    sub = parser.add_subparsers(dest='subcommand', required=True)

    solve = sub.add_parser('solve', parents=[common], help="Recover one synthetic instance")
    solve.add_argument('--d', type=int)
    solve.add_argument('--m', type=int)
    solve.add_argument('--eta', type=float)
    solve.add_argument('--model', choices=['cauchy', 'uniform_scaled', 'zero'])
    solve.add_argument('--trial', type=int)
    _add_solver_flags(solve)

    grid = sub.add_parser('phase-grid', parents=[common], help="Success rate over (m/d, eta)")
    grid.add_argument('--d', type=int)
    grid.add_argument('--ratios', type=_list, help="Comma-separated m/d values")
    grid.add_argument('--etas', type=_list, help="Comma-separated outlier fractions")
    grid.add_argument('--model', choices=['cauchy', 'uniform_scaled', 'zero'])
    grid.add_argument('--sets', type=int, help="Operator sets per cell")
    grid.add_argument('--signals', type=int, help="Signals per operator set")
    grid.add_argument('--tol', type=float, help="Success tolerance on dist")
    _add_solver_flags(grid)

    dims = sub.add_parser('dimension-grid', parents=[common], help="Success rate over (d, m)")
    dims.add_argument('--dims', type=_list)
    dims.add_argument('--ms', type=_list)
    dims.add_argument('--eta', type=float)
    dims.add_argument('--model', choices=['cauchy', 'uniform_scaled', 'zero'])
    dims.add_argument('--sets', type=int)
    dims.add_argument('--signals', type=int)
    dims.add_argument('--tol', type=float)
    _add_solver_flags(dims)

    converge = sub.add_parser('converge', parents=[common], help="Convergence traces and their median")
    converge.add_argument('--d', type=int)
    converge.add_argument('--m', type=int)
    converge.add_argument('--eta', type=float)
    converge.add_argument('--model', choices=['cauchy', 'uniform_scaled', 'zero'])
    converge.add_argument('--trials', type=int)
    _add_solver_flags(converge)

    runtime = sub.add_parser('runtime', parents=[common], help="Time to tolerance per inner solver")
    runtime.add_argument('--d', type=int)
    runtime.add_argument('--m', type=int)
    runtime.add_argument('--eta', type=float)
    runtime.add_argument('--models', type=_list)
    runtime.add_argument('--solvers', type=_list)
    runtime.add_argument('--trials', type=int)
    runtime.add_argument('--target', type=float, help="Target dist")
    _add_solver_flags(runtime)

    image = sub.add_parser('image', parents=[common], help="Hadamard image recovery over (k, eta)")
    image.add_argument('--images', help="Directory of PGM/PNG images")
    image.add_argument('--synthetic', type=int, help="Generate this many synthetic digit images")
    image.add_argument('--ks', type=_list)
    image.add_argument('--etas', type=_list)
    image.add_argument('--tol', dest='rel_tol', type=float, help="Relative success tolerance")
    _add_solver_flags(image)

    theory = sub.add_parser('theory', parents=[common], help="Rate constants over eta")
    theory.add_argument('--etas', type=_list, help="start:stop:step or comma-separated values")

    selftest = sub.add_parser('selftest', parents=[common], help="Oracle, rate-constant and wedge checks")
    selftest.add_argument('--instances', type=int)
    selftest.add_argument('--wedge-samples', dest='wedge_samples', type=int)

    return parser


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge the config file (if any) with command-line flags, flags winning."""
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")
        data = read_run_config_data(path.read_text(), args.subcommand)
    else:
        data = {'subcommand': args.subcommand, 'experiment': {}}

    for flag, key in (('seed', 'master_seed'), ('parallelism', 'parallelism'), ('out', 'out_dir')):
        if getattr(args, flag) is not None:
            data[key] = getattr(args, flag)

    for dest, path_keys in OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        target = data['experiment']
        for key in path_keys[:-1]:
            target = target.setdefault(key, {})
        target[path_keys[-1]] = value

    return build_run_config(data)


def output_layout(out_dir: str, default_name: str) -> Tuple[Path, str]:
    """(directory, main CSV name); an ``--out`` ending in .csv names the main table itself."""
    out = Path(out_dir)
    if out.suffix == '.csv':
        return out.parent, out.name
    return out, default_name


def cmd_solve(run: RunConfig, store: ResultStore, csv_name: str) -> Tuple[int, Dict[str, Any]]:
    result = run_single(run.experiment, run.master_seed)
    recovery = result.recovery
    print(f"dist={result.dist:.3e} objective={result.objective:.3e} "
          f"status={recovery.status} outer_iterations={recovery.outer_iterations}")

    store.export_csv(recovery.trace, csv_name)
    store.export_svg(recovery.trace, 'trace.svg', 'lines')
    save_instance(result.instance, store.path('instance.npz'))
    store.written['instance.npz'] = 'npz'
    return EXIT_OK, {'dist': result.dist, 'objective': result.objective, 'status': recovery.status}


def cmd_phase_grid(run: RunConfig, store: ResultStore, csv_name: str) -> Tuple[int, Dict[str, Any]]:
    grid = run_phase_grid(run.experiment, run.master_seed, run.parallelism)
    store.export_csv(grid, csv_name)
    store.export_svg(grid, 'phase_grid.svg', 'heatmap')
    return EXIT_OK, {'failures': int(grid.frame['failures'].sum())}


def cmd_dimension_grid(run: RunConfig, store: ResultStore, csv_name: str) -> Tuple[int, Dict[str, Any]]:
    grid = run_dimension_grid(run.experiment, run.master_seed, run.parallelism)
    store.export_csv(grid, csv_name)
    store.export_svg(grid, 'dimension_grid.svg', 'heatmap')
    return EXIT_OK, {'failures': int(grid.frame['failures'].sum())}


def cmd_converge(run: RunConfig, store: ResultStore, csv_name: str) -> Tuple[int, Dict[str, Any]]:
    result = run_convergence(run.experiment, run.master_seed, run.parallelism)
    for i, trace in enumerate(result.traces):
        if trace is not None:
            store.export_csv(trace, f"trace_{i:03d}.csv")
    store.export_csv(result, csv_name)
    store.export_svg(result, 'convergence.svg', 'lines')
    return EXIT_OK, {'failures': result.failures}


def cmd_runtime(run: RunConfig, store: ResultStore, csv_name: str) -> Tuple[int, Dict[str, Any]]:
    result = run_runtime_comparison(run.experiment, run.master_seed)
    store.export_csv(result, csv_name)
    if result.traces:
        store.export_svg(result, 'runtime.svg', 'lines')
    return EXIT_OK, {}


def cmd_image(run: RunConfig, store: ResultStore, csv_name: str) -> Tuple[int, Dict[str, Any]]:
    grid = run_image_experiment(run.experiment, run.master_seed, run.parallelism, work_dir=str(store.out_dir))
    store.export_csv(grid, csv_name)
    store.export_svg(grid, 'image_grid.svg', 'heatmap')
    return EXIT_OK, {'pixel_scaling': PIXEL_SCALING, 'failures': int(grid.frame['failures'].sum())}


def cmd_theory(run: RunConfig, store: ResultStore, csv_name: str) -> Tuple[int, Dict[str, Any]]:
    store.export_csv(rate_table(run.experiment.etas), csv_name)
    return EXIT_OK, {}


def cmd_selftest(run: RunConfig, store: ResultStore, csv_name: str) -> Tuple[int, Dict[str, Any]]:
    report = run_selftest(run.experiment, run.master_seed)
    store.export_csv(report.to_frame(), csv_name)
    for check, passed, value, threshold in report.rows:
        print(f"{check}: {'ok' if passed else 'FAILED'} ({value:.3e} vs {threshold:.3e})")
    return (EXIT_OK if report.passed else EXIT_SOLVER), {'passed': report.passed}


COMMANDS: Dict[str, Tuple[Callable[[RunConfig, ResultStore, str], Tuple[int, Dict[str, Any]]], str]] = {
    'solve': (cmd_solve, 'trace.csv'),
    'phase-grid': (cmd_phase_grid, 'phase_grid.csv'),
    'dimension-grid': (cmd_dimension_grid, 'dimension_grid.csv'),
    'converge': (cmd_converge, 'median_trace.csv'),
    'runtime': (cmd_runtime, 'runtime.csv'),
    'image': (cmd_image, 'image_grid.csv'),
    'theory': (cmd_theory, 'rates.csv'),
    'selftest': (cmd_selftest, 'selftest.csv'),
}


def _fail(error: BaseException, code: int) -> int:
    print(json.dumps({'error': type(error).__name__, 'code': code, 'message': str(error)}), file=sys.stderr)
    return code


def run(args: argparse.Namespace) -> int:
    run_config = resolve_run_config(args)
    out_dir, csv_name = output_layout(run_config.out_dir, COMMANDS[run_config.subcommand][1])
    store = ResultStore(out_dir)
    store.write_text(serialize_run_config(run_config), 'config.ini')

    logger.info(f"Running {run_config.subcommand} with seed {run_config.master_seed} "
                f"and parallelism {run_config.parallelism}")
    command, _ = COMMANDS[run_config.subcommand]
    code, extra = command(run_config, store, csv_name)
    store.write_manifest(run_config.model_dump(mode='json'), extra)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run the subcommand and map failures to exit codes.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        int: Exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        level = (args.log_level or config.log_level).upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ConfigError(f"Unknown log level: {args.log_level!r}")
        logging.basicConfig(level=level, format=LOG_FORMAT)
        return run(args)
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)
    except (ConfigError, ValidationError) as e:
        return _fail(e, EXIT_CONFIG)
    except OSError as e:
        return _fail(e, EXIT_IO)
    except (SolverError, ValueError) as e:
        # raised while the experiment runs, after the configuration was accepted
        return _fail(e, EXIT_SOLVER)


if __name__ == '__main__':
    sys.exit(main())
