import pandas as pd
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from harness import ConvergenceResult, PhaseGrid, RuntimeResult
from measurement import ProblemInstance
from operators import DenseOperator, HadamardOperator
from plots import export_svg
from robust_am import TRACE_CSV_COLUMNS, IterateTrace

logger = logging.getLogger(__name__)

INSTANCE_FORMAT_VERSION = 1
PIXEL_SCALING = 'grayscale / 255 (16-bit: / 65535), row-major, zero-padded to a power of two'


def software_version() -> str:
    try:
        return version('robust-am')
    except PackageNotFoundError:
        return '0.1.0'


def to_frame(result: Any) -> pd.DataFrame:
    """
    Tabular form of an experiment result, in its CSV schema.

    Args:
        result: PhaseGrid, IterateTrace, ConvergenceResult (median trace), RuntimeResult or DataFrame

    Returns:
        pd.DataFrame
    """
    if isinstance(result, PhaseGrid):
        return result.frame
    if isinstance(result, IterateTrace):
        return result.to_frame()[TRACE_CSV_COLUMNS]
    if isinstance(result, ConvergenceResult):
        return result.median
    if isinstance(result, RuntimeResult):
        return result.table
    if isinstance(result, pd.DataFrame):
        return result
    raise TypeError(f"Cannot export {type(result).__name__} as CSV")


def export_csv(result: Any, path: Union[str, Path]) -> Path:
    """Write ``result`` as CSV (header row, no index, '\\n' line endings)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    to_frame(result).to_csv(path, index=False, lineterminator='\n')
    logger.info(f"Wrote {path}")
    return path


class ResultStore:
    """
    Output directory of one run: CSV tables, SVG plots and the manifest.

    Attributes:
        out_dir (Path): Root of the run's outputs
        written (Dict[str, str]): File name -> kind of every file written so far
    """
    def __init__(self, out_dir: Union[str, Path]):
        """
        Initialize the store and create the output directory.

        Args:
            out_dir (str): Output directory

        Raises:
            OSError: If the directory cannot be created
        """
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: Dict[str, str] = {}
        self.started = datetime.now(timezone.utc)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def export_csv(self, result: Any, name: str) -> Path:
        self.written[name] = 'csv'
        return export_csv(result, self.path(name))

    def export_svg(self, result: Any, name: str, plot_kind: str) -> Path:
        self.written[name] = 'svg'
        return export_svg(result, self.path(name), plot_kind)

    def write_text(self, text: str, name: str) -> Path:
        target = self.path(name)
        target.write_text(text)
        self.written[name] = 'text'
        return target

    def write_manifest(self, run_config: Dict[str, Any], extra: Optional[Dict[str, Any]] = None) -> Path:
        """
        Write manifest.json: config echo, master seed, software version and timestamps.

        Args:
            run_config (Dict[str, Any]): JSON-ready run configuration
            extra (Dict[str, Any], optional): Additional run facts (pixel scaling, failures, ...)

        Returns:
            Path: The manifest file
        """
        manifest = {
            'software': 'robust-am',
            'version': software_version(),
            'master_seed': run_config.get('master_seed'),
            'config': run_config,
            'started': self.started.isoformat(),
            'finished': datetime.now(timezone.utc).isoformat(),
            'outputs': dict(sorted(self.written.items())),
        }
        if extra:
            manifest.update(extra)

        target = self.path('manifest.json')
        target.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + '\n')
        logger.info(f"Wrote {target}")
        return target


def save_instance(instance: ProblemInstance, path: Union[str, Path]) -> Path:
    """
    Dump an instance to a versioned .npz container.

    The ``header`` entry is a JSON document {format_version, kind, m, d, n, k,
    eta, seeds}; arrays are little-endian ``<f8`` (b, x_star, matrix),
    ``<i8`` (support) and ``<i1`` (sign_diagonals).

    Args:
        instance: Problem instance
        path: Output file (``.npz``)

    Returns:
        Path: The written file
    """
    op = instance.operator
    header = {
        'format_version': INSTANCE_FORMAT_VERSION,
        'kind': op.kind,
        'm': op.m,
        'd': op.d,
        'n': op.n if isinstance(op, HadamardOperator) else None,
        'k': op.k if isinstance(op, HadamardOperator) else None,
        'eta': instance.eta,
        'value_model': instance.value_model,
        'seeds': instance.seed_manifest,
    }
    arrays = {
        'header': np.array(json.dumps(header, sort_keys=True)),
        'b': instance.b.astype('<f8'),
        'x_star': (instance.x_star if instance.x_star is not None else np.array([])).astype('<f8'),
        'support': np.asarray(instance.outlier_support).astype('<i8'),
    }
    if isinstance(op, HadamardOperator):
        arrays['sign_diagonals'] = op.sign_diagonals.astype('<i1')
    else:
        arrays['matrix'] = op.to_dense().astype('<f8')

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        np.savez(f, **arrays)
    return path


def load_instance(path: Union[str, Path]) -> ProblemInstance:
    """
    Read an instance written by save_instance.

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: On an unknown format version or operator kind
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Instance file not found: {path}")

    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data['header']))
        if header.get('format_version') != INSTANCE_FORMAT_VERSION:
            raise ValueError(f"Unsupported instance format version: {header.get('format_version')}")

        if header['kind'] == 'dense':
            op = DenseOperator(data['matrix'].astype(np.float64))
        elif header['kind'] == 'hadamard':
            op = HadamardOperator(data['sign_diagonals'].astype(np.int8))
        else:
            raise ValueError(f"Unknown operator kind: {header['kind']}")

        x_star = data['x_star'].astype(np.float64)
        return ProblemInstance(
            operator=op,
            b=data['b'].astype(np.float64),
            x_star=x_star if x_star.size else None,
            outlier_support=data['support'].astype(np.int64),
            eta=header['eta'],
            value_model=header.get('value_model', 'zero'),
            seed_manifest=header.get('seeds', {})
        )
