"""Filesystem-backed pipeline plumbing: run layout, atomic writes, worker pool, CSV tables."""
import csv
import io
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

logger = logging.getLogger(__name__)


class RunLayout:
    """Where every artifact of a run lives under the output directory."""

    def __init__(self, root):
        self.root = Path(root)

    @property
    def sources_dir(self):
        return self.root / 'sources'

    @property
    def cases_dir(self):
        return self.root / 'cases'

    @property
    def manifest(self):
        return self.root / 'manifest.jsonl'

    @property
    def models_dir(self):
        return self.root / 'models'

    def map_path(self, detector, case_id):
        return self.root / 'maps' / detector / f'{case_id}.tmap'

    @property
    def timing(self):
        return self.root / 'timing.csv'

    @property
    def records(self):
        return self.root / 'records.jsonl'

    @property
    def reports_dir(self):
        return self.root / 'reports'

    @property
    def gridsearch(self):
        return self.root / 'gridsearch.csv'

    @property
    def gridsearch_profiles(self):
        return self.root / 'gridsearch_profiles.csv'

    @property
    def errors(self):
        return self.root / 'errors.csv'

    def maps_dir(self, detector):
        return self.root / 'maps' / detector


def atomic_write(path, data):
    """Write ``data`` (bytes or str) to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode('utf-8')
    fd, temp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as handle:
            handle.write(data)
        os.replace(temp, path)
    except BaseException:
        if os.path.exists(temp):
            os.unlink(temp)
        raise


def run_parallel(func, items, workers=1):
    """Apply ``func`` to every item; returns (item, result, error) triples in input order.

    Exceptions raised by one item are captured so the rest of the run continues.
    """
    items = list(items)
    outcomes = []
    if workers <= 1 or len(items) <= 1:
        for item in items:
            try:
                outcomes.append((item, func(item), None))
            except Exception as exc:
                logger.warning('Work item %s failed: %s', _label(item), exc)
                outcomes.append((item, None, exc))
        return outcomes

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, item) for item in items]
        for item, future in zip(items, futures):
            try:
                outcomes.append((item, future.result(), None))
            except Exception as exc:
                logger.warning('Work item %s failed: %s', _label(item), exc)
                outcomes.append((item, None, exc))
    return outcomes


def _label(item):
    return getattr(item, 'case_id', None) or repr(item)[:80]


def format_csv(header, rows, config_hash=None):
    buffer = io.StringIO()
    if config_hash is not None:
        buffer.write(f'# config_hash={config_hash}\n')
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_csv(path, header, rows, config_hash=None):
    atomic_write(path, format_csv(header, rows, config_hash))


def read_csv(path):
    """Rows of a CSV table as dicts, skipping ``#`` comment lines."""
    with open(path, newline='') as handle:
        lines = [line for line in handle if not line.startswith('#')]
    return list(csv.DictReader(lines))
