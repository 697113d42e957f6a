"""Full-factorial search over fusion parameters on an evaluated corpus."""
import itertools
import logging
from dataclasses import dataclass
from functools import partial

import numpy as np

from benchmark.pipeline import run_parallel, write_csv
from evaluation.services import evaluate_map
from jpeg_model.exceptions import InvalidArgument

from .services import MAX_ITERS, check_candidates, fused_map
from .structures import FusionParams

logger = logging.getLogger(__name__)

PARAMETERS = ('alpha', 'beta', 'delta', 'rho')
METRICS = ('f1', 'auc')
AUC_METRIC_CAP = 0.1


def _steps(low, high, count):
    return tuple(round(float(v), 6) for v in np.linspace(low, high, count))


DEFAULT_GRID = {
    'alpha': _steps(-1.5, 1.5, 13),
    'beta': _steps(0.0, 2.25, 10),
    'delta': _steps(0.0, 0.15, 7),
    'rho': _steps(0.0, 0.2, 5),
}


def grid_cells(grid=DEFAULT_GRID):
    """Every parameter combination, alpha varying slowest."""
    missing = set(PARAMETERS) - set(grid)
    if missing:
        raise InvalidArgument(f'parameter grid lacks {", ".join(sorted(missing))}')
    values = [tuple(grid[name]) for name in PARAMETERS]
    if not all(values):
        raise InvalidArgument('every parameter needs at least one grid value')
    return [FusionParams(*cell) for cell in itertools.product(*values)]


@dataclass(frozen=True)
class GridSearchResult:
    """Rows ranked by metric (grid order on ties) and, per parameter, the best value reachable at each setting."""

    metric: str
    rows: tuple
    profiles: dict

    @property
    def best(self):
        row = self.rows[0]
        return FusionParams(*(row[name] for name in PARAMETERS))


def case_metric(record, metric):
    return record.max_f1 if metric == 'f1' else record.auc[AUC_METRIC_CAP]


def _score_cell(params, corpus, metric, max_iters):
    values = [
        case_metric(evaluate_map(fused_map(candidates, params, max_iters=max_iters), gt, clean=False), metric)
        for candidates, gt in corpus
    ]
    return float(np.mean(values))


def max_profiles(rows):
    profiles = {}
    for name in PARAMETERS:
        profile = {}
        for row in rows:
            profile[row[name]] = max(profile.get(row[name], -np.inf), row['value'])
        profiles[name] = dict(sorted(profile.items()))
    return profiles


def grid_search(corpus, grid=DEFAULT_GRID, metric='f1', workers=1, max_iters=MAX_ITERS):
    """Score every grid cell by the mean per-case metric of the fused maps.

    ``corpus`` holds (candidate maps, GroundTruthMask) pairs; negative
    controls are skipped. ``metric`` is ``'f1'`` (max F1) or ``'auc'``
    (AUC up to a 0.1 false-positive rate).
    """
    if metric not in METRICS:
        raise InvalidArgument(f'metric must be one of {METRICS}, got {metric!r}')
    corpus = [(check_candidates(candidates), gt) for candidates, gt in corpus if not gt.is_negative_control]
    if not corpus:
        raise InvalidArgument('grid search needs at least one case with tampered blocks')
    cells = grid_cells(grid)
    logger.info('Grid search over %d cells on %d cases (%s)', len(cells), len(corpus), metric)

    worker = partial(_score_cell, corpus=corpus, metric=metric, max_iters=max_iters)
    rows = []
    for params, value, error in run_parallel(worker, cells, workers):
        if error is not None:
            raise error
        rows.append({**params.as_dict(), 'metric': metric, 'value': value})
    ranked = sorted(rows, key=lambda row: -row['value'])
    return GridSearchResult(metric, tuple(ranked), max_profiles(rows))


def write_grid_search(path, result, config_hash=None):
    header = list(PARAMETERS) + ['metric', 'value']
    rows = [[row[name] for name in PARAMETERS] + [row['metric'], f'{row["value"]:.6f}'] for row in result.rows]
    write_csv(path, header, rows, config_hash)


def write_profiles(path, result, config_hash=None):
    rows = [
        [name, value, f'{best:.6f}']
        for name, profile in result.profiles.items()
        for value, best in profile.items()
    ]
    write_csv(path, ['parameter', 'value', 'max_value'], rows, config_hash)
