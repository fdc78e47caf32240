import pytest

from harness import PhaseGridSpec, SolveSpec
from run_config import (
    ConfigError,
    RunConfig,
    build_run_config,
    load_run_config,
    parse_run_config,
    save_run_config,
    serialize_run_config,
)
from theory import TheorySpec

PHASE_GRID_CONFIG = """
[run]
subcommand = phase-grid
master_seed = 42
parallelism = 3

[experiment]
d = 50
ratios = 2.0, 4.0, 6.0
etas = 0.0, 0.1

[experiment.solver]
max_outer = 20
dist_tol =

[experiment.solver.admm]
rho0 = 0.5
"""


def test_parse_nested_sections():
    run = parse_run_config(PHASE_GRID_CONFIG)

    assert run.subcommand == 'phase-grid'
    assert run.master_seed == 42
    assert run.parallelism == 3
    assert isinstance(run.experiment, PhaseGridSpec)
    assert run.experiment.ratios == [2.0, 4.0, 6.0]
    assert run.experiment.solver.max_outer == 20
    assert run.experiment.solver.dist_tol is None
    assert run.experiment.solver.admm.rho0 == 0.5
    assert run.experiment.n_signals_per_set == 30


def test_serialized_config_parses_back():
    original = build_run_config({
        'subcommand': 'solve',
        'master_seed': 7,
        'experiment': {'d': 12, 'm': 120, 'eta': 0.05, 'init': {'method': 'oracle', 'radius_fraction': 0.03}},
    })
    text = serialize_run_config(original)

    assert '[experiment.init.spectral]' in text
    assert parse_run_config(text) == original


def test_save_and_load(tmp_path):
    run = RunConfig(subcommand='theory', experiment={'etas': '0:0.2:0.1'})
    path = save_run_config(run, tmp_path / 'config.ini')

    loaded = load_run_config(path)
    assert isinstance(loaded.experiment, TheorySpec)
    assert loaded.experiment.etas == [0.0, 0.1, 0.2]


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_run_config(tmp_path / 'absent.ini')


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError, match="Unknown keys in \\[experiment\\]: ratio"):
        parse_run_config("[run]\nsubcommand = phase-grid\n[experiment]\nratio = 2.0\n")


def test_unknown_section_is_rejected():
    with pytest.raises(ConfigError, match="Unknown config section"):
        parse_run_config("[run]\nsubcommand = solve\n[plotting]\ncolor = red\n")


def test_subcommand_clash():
    with pytest.raises(ConfigError, match="but the command is"):
        parse_run_config(PHASE_GRID_CONFIG, subcommand='solve')


def test_subcommand_from_invocation():
    run = parse_run_config("[experiment]\nd = 5\n", subcommand='solve')
    assert isinstance(run.experiment, SolveSpec)
    assert run.experiment.d == 5


def test_missing_subcommand():
    with pytest.raises(ConfigError, match="missing subcommand"):
        parse_run_config("[experiment]\nd = 5\n")


def test_invalid_values_become_config_errors():
    with pytest.raises(ConfigError, match="Invalid configuration"):
        parse_run_config("[run]\nsubcommand = solve\n[experiment]\nd = 0\n")
    with pytest.raises(ConfigError, match="Invalid configuration"):
        parse_run_config("[run]\nsubcommand = solve\nmaster_seed = -1\n")


def test_malformed_text():
    with pytest.raises(ConfigError, match="Malformed config"):
        parse_run_config("d = 5\n")


def test_format_version_is_checked():
    with pytest.raises(ConfigError):
        parse_run_config("[run]\nsubcommand = theory\nformat_version = 2\n")


def test_parallelism_defaults_to_environment(monkeypatch):
    from config import config

    monkeypatch.setattr(config, 'parallelism', 6)
    assert RunConfig(subcommand='theory').parallelism == 6
