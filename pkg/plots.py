"""SVG output: success-rate heatmaps and semilog distance traces."""
import logging
from pathlib import Path
from typing import Any, Dict, Literal, Union

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from harness import ConvergenceResult, PhaseGrid, RuntimeResult  # noqa: E402
from robust_am import IterateTrace  # noqa: E402

logger = logging.getLogger(__name__)

DIST_FLOOR = 1e-16
PlotKind = Literal['heatmap', 'lines']

# fixed ids and no timestamp, so identical inputs give identical files
plt.rcParams['svg.hashsalt'] = 'robust-am'
plt.rcParams['svg.fonttype'] = 'path'

AXIS_LABELS = {
    'm_over_d': 'm / d',
    'eta': r'outlier fraction $\eta$',
    'd': 'signal dimension d',
    'm': 'measurements m',
    'k': 'modulations k',
}


def _series(result: Any) -> Dict[str, pd.DataFrame]:
    """Named (x, dist) series of a line-plot result."""
    if isinstance(result, IterateTrace):
        frame = result.to_frame()
        start = pd.DataFrame({'k': [0], 'dist': [result.initial_dist]}) if result.initial_dist is not None else None
        frame = frame[['k', 'dist']] if start is None else pd.concat([start, frame[['k', 'dist']]], ignore_index=True)
        return {'trace': frame.rename(columns={'k': 'x'})}
    if isinstance(result, ConvergenceResult):
        series = {}
        for i, trace in enumerate(result.traces):
            if trace is not None:
                series[f"trial {i}"] = _series(trace)['trace']
        series['median'] = result.median.rename(columns={'k': 'x', 'median_dist': 'dist'})
        return series
    if isinstance(result, RuntimeResult):
        return {name: frame.rename(columns={'wall_time_s': 'x'}) for name, frame in sorted(result.traces.items())}
    raise TypeError(f"Cannot draw {type(result).__name__} as a line plot")


def _heatmap(ax, grid: PhaseGrid):
    matrix = grid.matrix().sort_index()
    image = ax.imshow(matrix.to_numpy(dtype=float), origin='lower', aspect='auto', cmap='gray',
                      vmin=0.0, vmax=1.0, interpolation='nearest')
    ax.set_yticks(range(len(matrix.index)))
    ax.set_yticklabels([f"{v:g}" for v in matrix.index])
    ax.set_xticks(range(len(matrix.columns)))
    ax.set_xticklabels([f"{v:g}" for v in matrix.columns], rotation=45)
    ax.set_ylabel(AXIS_LABELS.get(grid.row_axis, grid.row_axis))
    ax.set_xlabel(AXIS_LABELS.get(grid.col_axis, grid.col_axis))
    ax.set_title('empirical success rate')
    ax.figure.colorbar(image, ax=ax)


def _lines(ax, result: Any):
    series = _series(result)
    for name, frame in series.items():
        dists = np.maximum(frame['dist'].to_numpy(dtype=float), DIST_FLOOR)
        style = {'color': 'black', 'linewidth': 2.0} if name == 'median' else {'linewidth': 1.0}
        ax.semilogy(frame['x'].to_numpy(dtype=float), dists, label=name, **style)

    ax.set_xlabel('elapsed time (s)' if isinstance(result, RuntimeResult) else 'outer iteration k')
    ax.set_ylabel(r'dist($x_k$, $x_\star$)')
    if len(series) <= 12:
        ax.legend()


def export_svg(result: Any, path: Union[str, Path], plot_kind: PlotKind) -> Path:
    """
    Render ``result`` to an SVG file.

    Args:
        result: PhaseGrid for heatmaps; IterateTrace, ConvergenceResult or RuntimeResult for lines
        path: Output file
        plot_kind: 'heatmap' or 'lines'

    Returns:
        Path: The written file
    """
    if plot_kind not in ('heatmap', 'lines'):
        raise ValueError(f"Unknown plot kind: {plot_kind}")
    if plot_kind == 'heatmap' and not isinstance(result, PhaseGrid):
        raise TypeError(f"Heatmaps need a PhaseGrid, got {type(result).__name__}")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    try:
        if plot_kind == 'heatmap':
            _heatmap(ax, result)
        else:
            _lines(ax, result)
        fig.tight_layout()
        fig.savefig(path, format='svg', metadata={'Date': None})
    finally:
        plt.close(fig)

    logger.info(f"Wrote {path}")
    return path
