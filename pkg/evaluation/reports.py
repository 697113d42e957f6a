"""Report tables and images built from evaluation records and run logs."""
import io
import logging
from collections import defaultdict

import numpy as np
from PIL import Image

from benchmark.pipeline import atomic_write, write_csv
from jpeg_model.exceptions import InvalidArgument

from .metrics import THRESHOLDS
from .services import BY_DETECTOR, BY_QUALITY, aggregate, quality_grid
from .structures import AUC_CAPS

logger = logging.getLogger(__name__)

DIAGONAL_BAND = 2
FAR_BAND = 10
HEATMAP_SCALE = 16


def _fmt(value):
    return f'{value:.6f}'


def write_summary(path, records, config_hash=None):
    """Mean max-F1 and partial AUCs per detector."""
    table = aggregate(records, BY_DETECTOR)
    header = ['detector', 'cases', 'max_f1'] + [f'auc_{cap}' for cap in AUC_CAPS]
    rows = [
        [detector, row['cases'], _fmt(row['max_f1'])] + [_fmt(row[f'auc_{cap}']) for cap in AUC_CAPS]
        for detector, row in table.items()
    ]
    write_csv(path, header, rows, config_hash)
    return table


def write_quality_table(path, records, config_hash=None):
    table = aggregate(records, BY_QUALITY)
    rows = [[detector, q1, q2, row['cases'], _fmt(row['max_f1'])] for (detector, q1, q2), row in table.items()]
    write_csv(path, ['detector', 'q1', 'q2', 'cases', 'max_f1'], rows, config_hash)
    return table


def heatmap_image(grid, scale=HEATMAP_SCALE):
    """Grayscale rendering of a (q1, q2) grid; white is F1 = 1, empty cells are black."""
    pixels = np.rint(np.nan_to_num(np.asarray(grid, dtype=np.float64), nan=0.0) * 255).astype(np.uint8)
    return Image.fromarray(np.kron(pixels, np.ones((scale, scale), dtype=np.uint8)))


def write_heatmap(path, records, detector, qualities):
    grid = quality_grid(records, detector, qualities)
    buffer = io.BytesIO()
    heatmap_image(grid).save(buffer, format='PNG')
    atomic_write(path, buffer.getvalue())
    return grid


def roc_table(records):
    """Mean (fp_rate, tp_rate, f1) per detector and threshold over positive cases."""
    sums = defaultdict(lambda: np.zeros((len(THRESHOLDS), 3)))
    counts = defaultdict(int)
    for record in records:
        if record.negative_control:
            continue
        sums[record.detector] += [[s.fp_rate, s.tp_rate, s.f1] for s in record.samples]
        counts[record.detector] += 1
    rows = []
    for detector in sorted(sums):
        means = sums[detector] / counts[detector]
        for tau, (fp, tp, f1) in zip(THRESHOLDS, means):
            rows.append([detector, _fmt(tau), _fmt(fp), _fmt(tp), _fmt(f1)])
    return rows


def write_roc_points(path, records, config_hash=None):
    rows = roc_table(records)
    write_csv(path, ['detector', 'threshold', 'fp_rate', 'tp_rate', 'f1'], rows, config_hash)
    return rows


def timing_summary(timing_rows):
    """Mean detection seconds per detector from timing log rows."""
    seconds = defaultdict(list)
    for row in timing_rows:
        seconds[row['detector']].append(float(row['seconds']))
    return {detector: float(np.mean(values)) for detector, values in sorted(seconds.items())}


def write_timing_storage(path, timing_rows, storage=None, config_hash=None):
    """Mean seconds per detector, then mean model size in MB per training key."""
    rows = [['time', detector, _fmt(value)] for detector, value in timing_summary(timing_rows).items()]
    for key, megabytes in sorted((storage or {}).items(), key=lambda item: str(item[0])):
        rows.append(['storage', key, _fmt(megabytes)])
    write_csv(path, ['kind', 'key', 'value'], rows, config_hash)
    return rows


def response_distribution(pairs, bins=20):
    """Histograms of tampered and authentic block scores plus the best single threshold.

    ``pairs`` yields (TamperingMap, GroundTruthMask). Accuracy is balanced
    (mean of the true positive and true negative rates) and the threshold
    is chosen among the evaluation thresholds.
    """
    tampered, authentic = [], []
    for m, gt in pairs:
        tampered.append(m.scores[gt.cells])
        authentic.append(m.scores[~gt.cells])
    tampered, authentic = np.concatenate(tampered or [[]]), np.concatenate(authentic or [[]])
    if not tampered.size or not authentic.size:
        raise InvalidArgument('response distributions need both tampered and authentic blocks')
    edges = np.linspace(0.0, 1.0, bins + 1)
    accuracy = [
        ((tampered >= tau).mean() + (authentic < tau).mean()) / 2 for tau in THRESHOLDS
    ]
    best = int(np.argmax(accuracy))
    return {
        'edges': edges,
        'tampered': np.histogram(tampered, edges)[0],
        'authentic': np.histogram(authentic, edges)[0],
        'threshold': THRESHOLDS[best],
        'accuracy': float(accuracy[best]),
    }


def write_response_distribution(path, detector, distribution, config_hash=None):
    edges = distribution['edges']
    rows = [
        [detector, _fmt(low), _fmt(high), int(t), int(a)]
        for low, high, t, a in zip(edges[:-1], edges[1:], distribution['tampered'], distribution['authentic'])
    ]
    rows.append([detector, 'best_threshold', _fmt(distribution['threshold']), 'accuracy',
                 _fmt(distribution['accuracy'])])
    write_csv(path, ['detector', 'low', 'high', 'tampered', 'authentic'], rows, config_hash)


def write_coverage(path, cover, config_hash=None):
    rows = [[q1, q2, count] for (q1, q2), count in cover.counts.items()]
    rows.append(['min', 'mean', 'max'])
    rows.append([cover.minimum, _fmt(cover.mean), cover.maximum])
    write_csv(path, ['q1', 'q2', 'cases'], rows, config_hash)


def reliability_bands(records, diagonal=DIAGONAL_BAND, far=FAR_BAND):
    """Mean max-F1 per detector near the diagonal (q2 - q1 <= diagonal) and far from it (>= far).

    A band without cases is NaN.
    """
    bands = defaultdict(lambda: {'diagonal': [], 'far': []})
    for record in records:
        if record.negative_control:
            continue
        gap = record.q2 - record.q1
        if gap <= diagonal:
            bands[record.detector]['diagonal'].append(record.max_f1)
        elif gap >= far:
            bands[record.detector]['far'].append(record.max_f1)
    return {
        detector: {band: float(np.mean(values)) if values else float('nan') for band, values in split.items()}
        for detector, split in sorted(bands.items())
    }


def write_reliability_bands(path, records, config_hash=None):
    summary = reliability_bands(records)
    rows = [[detector, _fmt(s['diagonal']), _fmt(s['far'])] for detector, s in summary.items()]
    write_csv(path, ['detector', 'diagonal', 'far'], rows, config_hash)
    return summary
