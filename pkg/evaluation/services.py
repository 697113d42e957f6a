"""Per-case evaluation records and their aggregation."""
import logging
from collections import defaultdict
from pathlib import Path

import numpy as np

from benchmark.pipeline import atomic_write
from jpeg_model.exceptions import InvalidArgument

from .metrics import auc, pchip_curve, roc_samples
from .schemas import dumps_records, loads_records
from .structures import AUC_CAPS, EvalRecord

logger = logging.getLogger(__name__)

BY_DETECTOR = 'detector'
BY_QUALITY = 'q1q2'


def evaluate_map(m, gt, case_id='', q1=0, q2=0, clean=True, config_hash=None):
    """Full protocol for one map: threshold sweep, optional cleanup, ROC, max F1 and partial AUCs.

    Decision maps produced by fusion are evaluated with ``clean=False``.
    """
    samples = roc_samples(m, gt, clean)
    curve = pchip_curve(samples)
    return EvalRecord(
        case_id=case_id,
        detector=m.detector,
        q1=q1,
        q2=q2,
        samples=samples,
        max_f1=max(s.f1 for s in samples),
        auc={cap: auc(curve, cap) for cap in AUC_CAPS},
        negative_control=gt.is_negative_control,
        config_hash=config_hash,
    )


def _key(record, group_by):
    if group_by == BY_DETECTOR:
        return record.detector
    if group_by == BY_QUALITY:
        return (record.detector, record.q1, record.q2)
    raise InvalidArgument(f'unknown grouping {group_by!r}')


def aggregate(records, group_by=BY_DETECTOR):
    """Mean max-F1 and mean AUCs per group, negative controls left out.

    Returns ``{key: {'cases', 'max_f1', 'auc_0.05', 'auc_0.1', 'auc_0.2'}}``
    with keys sorted; a (q1, q2) grouping keys by (detector, q1, q2).
    """
    records = list(records)
    if not records:
        raise InvalidArgument('nothing to aggregate')
    groups = defaultdict(list)
    for record in records:
        if not record.negative_control:
            groups[_key(record, group_by)].append(record)
    table = {}
    for key in sorted(groups):
        members = groups[key]
        row = {'cases': len(members), 'max_f1': float(np.mean([r.max_f1 for r in members]))}
        for cap in AUC_CAPS:
            row[f'auc_{cap}'] = float(np.mean([r.auc[cap] for r in members]))
        table[key] = row
    return table


def quality_grid(records, detector, qualities):
    """Square array of mean max-F1 indexed by (q1, q2); NaN where no case exists."""
    qualities = list(qualities)
    index = {q: i for i, q in enumerate(qualities)}
    grid = np.full((len(qualities), len(qualities)), np.nan)
    for (name, q1, q2), row in aggregate(records, BY_QUALITY).items():
        if name == detector and q1 in index and q2 in index:
            grid[index[q1], index[q2]] = row['max_f1']
    return grid


def write_records(path, records):
    atomic_write(path, dumps_records(records))
    logger.info('Wrote %d evaluation records to %s', len(records), path)


def read_records(path):
    return loads_records(Path(path).read_text())
