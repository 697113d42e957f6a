"""Trained classifiers on disk: ``<root>/<family>/<window>/<q2|oblivious>.model``."""
import logging
from pathlib import Path

from benchmark.pipeline import atomic_write
from jpeg_model.exceptions import InvalidArgument, NotFound

from .classifiers import dumps_model, loads_model

logger = logging.getLogger(__name__)

OBLIVIOUS = 'oblivious'
AWARE = 'aware'
MODES = (AWARE, OBLIVIOUS)


def nearest_quality(available, q2):
    """Closest trained quality to ``q2``; ties go to the higher quality."""
    if not available:
        raise NotFound('no quality-aware models')
    return min(available, key=lambda q: (abs(q - q2), -q))


class ClassifierRegistry:
    def __init__(self, root, family='fdf'):
        self.root = Path(root)
        self.family = family
        self._cache = {}

    def path(self, window_size, key):
        return self.root / self.family / str(window_size) / f'{key}.model'

    def save(self, model, window_size, key):
        if key != OBLIVIOUS and not 1 <= int(key) <= 100:
            raise InvalidArgument(f'model key must be a quality or {OBLIVIOUS!r}, got {key!r}')
        path = self.path(window_size, key)
        atomic_write(path, dumps_model(model))
        self._cache[(window_size, str(key))] = model
        logger.info('Saved %s model %s/%s to %s', self.family, window_size, key, path)
        return path

    def load(self, window_size, key):
        cache_key = (window_size, str(key))
        if cache_key not in self._cache:
            path = self.path(window_size, key)
            if not path.exists():
                raise NotFound(f'no {self.family} model for window {window_size} and {key}')
            self._cache[cache_key] = loads_model(path.read_bytes())
        return self._cache[cache_key]

    def window_sizes(self):
        directory = self.root / self.family
        if not directory.is_dir():
            return []
        return sorted(int(p.name) for p in directory.iterdir() if p.is_dir() and p.name.isdigit())

    def qualities(self, window_size):
        directory = self.root / self.family / str(window_size)
        if not directory.is_dir():
            return []
        return sorted(int(p.stem) for p in directory.glob('*.model') if p.stem.isdigit())

    def has_oblivious(self, window_size):
        return self.path(window_size, OBLIVIOUS).exists()

    def storage_mb(self):
        """Mean model file size in MB per key (quality or oblivious), across window sizes."""
        sizes = {}
        for path in sorted((self.root / self.family).glob('*/*.model')):
            sizes.setdefault(path.stem, []).append(path.stat().st_size / 2**20)
        return {key: sum(values) / len(values) for key, values in sizes.items()}


def select_classifier(registry, window_size, q2, mode=AWARE):
    """Quality-aware lookup of the nearest trained Q2, or the window's oblivious model."""
    if mode not in MODES:
        raise InvalidArgument(f'classifier mode must be one of {MODES}, got {mode!r}')
    if mode == OBLIVIOUS:
        return registry.load(window_size, OBLIVIOUS)
    qualities = registry.qualities(window_size)
    if not qualities:
        raise NotFound(f'no quality-aware {registry.family} models for window {window_size}')
    return registry.load(window_size, nearest_quality(qualities, q2))
