"""Typed run configuration and its sectioned text format.

A run config file looks like::

    [run]
    subcommand = phase-grid
    master_seed = 42
    parallelism = 8
    out_dir = results
    format_version = 1

    [experiment]
    d = 50
    ratios = 2.0, 4.0, 6.0
    etas = 0.0, 0.1

    [experiment.solver]
    max_outer = 50

    [experiment.solver.admm]
    rho0 = 1.0

Nested models live in dotted sections, lists are comma separated, floats are
written with repr and an empty value means None. Settings resolve as
command-line flag > config file > environment > model default.
"""
import configparser
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Type, Union, get_args, get_origin

from pydantic import BaseModel, Field, ValidationError, model_validator

from config import config
from harness import ConvergenceSpec, DimensionGridSpec, ImageExperimentSpec, PhaseGridSpec, RuntimeSpec, SolveSpec
from seeding import MAX_SEED
from selftest import SelftestSpec
from theory import TheorySpec

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
RUN_SECTION = 'run'
EXPERIMENT_SECTION = 'experiment'

Subcommand = Literal['solve', 'phase-grid', 'dimension-grid', 'converge', 'runtime', 'image', 'theory', 'selftest']

EXPERIMENT_SPECS: Dict[str, Type[BaseModel]] = {
    'solve': SolveSpec,
    'phase-grid': PhaseGridSpec,
    'dimension-grid': DimensionGridSpec,
    'converge': ConvergenceSpec,
    'runtime': RuntimeSpec,
    'image': ImageExperimentSpec,
    'theory': TheorySpec,
    'selftest': SelftestSpec,
}

ExperimentSpec = Union[SolveSpec, PhaseGridSpec, DimensionGridSpec, ConvergenceSpec, RuntimeSpec,
                       ImageExperimentSpec, TheorySpec, SelftestSpec]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


class RunConfig(BaseModel):
    """
    One CLI run: the subcommand, its experiment spec and the run-level settings.
    """
    subcommand: Subcommand
    master_seed: int = Field(default=0, ge=0, le=MAX_SEED)
    parallelism: int = Field(default_factory=lambda: config.parallelism, ge=1)
    out_dir: str = Field(default='results')
    format_version: int = Field(default=FORMAT_VERSION)
    experiment: ExperimentSpec

    @model_validator(mode='before')
    @classmethod
    def build_experiment(cls, data: Any):
        if not isinstance(data, dict):
            return data
        spec_cls = EXPERIMENT_SPECS.get(data.get('subcommand'))
        if spec_cls is None:
            return data
        experiment = data.get('experiment')
        if experiment is None:
            experiment = {}
        if not isinstance(experiment, spec_cls):
            if isinstance(experiment, BaseModel):
                raise ValueError(f"Subcommand {data['subcommand']!r} needs a {spec_cls.__name__}, "
                                 f"got {type(experiment).__name__}")
            experiment = spec_cls.model_validate(experiment)
        return {**data, 'experiment': experiment}

    @model_validator(mode='after')
    def validate_version(self):
        if self.format_version != FORMAT_VERSION:
            raise ValueError(f"Unsupported config format version {self.format_version}, expected {FORMAT_VERSION}")
        return self


def _strip_optional(annotation: Any) -> Any:
    if get_origin(annotation) is Union:
        args = [a for a in get_args(annotation) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return annotation


def _model_type(annotation: Any) -> Optional[Type[BaseModel]]:
    inner = _strip_optional(annotation)
    if isinstance(inner, type) and issubclass(inner, BaseModel):
        return inner
    return None


def _is_list(annotation: Any) -> bool:
    return get_origin(_strip_optional(annotation)) in (list, List)


def _encode(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ', '.join(_encode(v) for v in value)
    return str(value)


def _decode(raw: str, annotation: Any) -> Any:
    raw = raw.strip()
    if raw == '':
        return [] if _is_list(annotation) else None
    if _is_list(annotation):
        return [item.strip() for item in raw.split(',')]
    return raw


def _write_model(parser: configparser.ConfigParser, model: BaseModel, section: str) -> None:
    parser.add_section(section)
    nested = []
    for name in type(model).model_fields:
        value = getattr(model, name)
        if isinstance(value, BaseModel):
            nested.append((name, value))
        else:
            parser.set(section, name, _encode(value))
    for name, value in nested:
        _write_model(parser, value, f"{section}.{name}")


def _read_model(parser: configparser.ConfigParser, model_cls: Type[BaseModel], section: str) -> Dict[str, Any]:
    items = dict(parser.items(section)) if parser.has_section(section) else {}
    unknown = sorted(set(items) - set(model_cls.model_fields))
    if unknown:
        raise ConfigError(f"Unknown keys in [{section}]: {', '.join(unknown)}")

    data: Dict[str, Any] = {}
    for name, field in model_cls.model_fields.items():
        nested = _model_type(field.annotation)
        if nested is not None:
            sub = f"{section}.{name}"
            if any(s == sub or s.startswith(sub + '.') for s in parser.sections()):
                data[name] = _read_model(parser, nested, sub)
        elif name in items:
            data[name] = _decode(items[name], field.annotation)
    return data


def serialize_run_config(run_config: RunConfig) -> str:
    """Render a RunConfig in the sectioned text format."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.add_section(RUN_SECTION)
    for name in ('subcommand', 'master_seed', 'parallelism', 'out_dir', 'format_version'):
        parser.set(RUN_SECTION, name, _encode(getattr(run_config, name)))
    _write_model(parser, run_config.experiment, EXPERIMENT_SECTION)

    lines = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {value}" for key, value in parser.items(section))
        lines.append('')
    return '\n'.join(lines)


def read_run_config_data(text: str, subcommand: Optional[str] = None) -> Dict[str, Any]:
    """
    Parse the text format into the nested dict a RunConfig is validated from.

    Args:
        text: Config file contents
        subcommand: Subcommand of the invocation; must match the file's when both are given

    Returns:
        Dict[str, Any]: Raw (string-valued) settings, ready for flag overrides

    Raises:
        ConfigError: On syntax errors, unknown sections or keys, or a subcommand clash
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"Malformed config: {e}") from e

    for section in parser.sections():
        if section != RUN_SECTION and section != EXPERIMENT_SECTION and not section.startswith(EXPERIMENT_SECTION + '.'):
            raise ConfigError(f"Unknown config section [{section}]")

    run = dict(parser.items(RUN_SECTION)) if parser.has_section(RUN_SECTION) else {}
    unknown = sorted(set(run) - {'subcommand', 'master_seed', 'parallelism', 'out_dir', 'format_version'})
    if unknown:
        raise ConfigError(f"Unknown keys in [{RUN_SECTION}]: {', '.join(unknown)}")

    file_subcommand = run.get('subcommand')
    if subcommand and file_subcommand and file_subcommand != subcommand:
        raise ConfigError(f"Config is for {file_subcommand!r}, but the command is {subcommand!r}")
    subcommand = subcommand or file_subcommand
    if subcommand not in EXPERIMENT_SPECS:
        raise ConfigError(f"Unknown or missing subcommand: {subcommand!r}")

    data: Dict[str, Any] = {key: value for key, value in run.items() if value.strip() != ''}
    data['subcommand'] = subcommand
    data['experiment'] = _read_model(parser, EXPERIMENT_SPECS[subcommand], EXPERIMENT_SECTION)
    return data


def build_run_config(data: Dict[str, Any]) -> RunConfig:
    """Validate nested settings into a RunConfig, reporting problems as ConfigError."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


def parse_run_config(text: str, subcommand: Optional[str] = None) -> RunConfig:
    return build_run_config(read_run_config_data(text, subcommand))


def load_run_config(path: Union[str, Path], subcommand: Optional[str] = None) -> RunConfig:
    """
    Read and validate a config file.

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: If it is malformed or invalid
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    return parse_run_config(path.read_text(), subcommand)


def save_run_config(run_config: RunConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_run_config(run_config))
    return path
