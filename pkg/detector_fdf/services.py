"""Sliding-window first-digit detectors (single-scale FDF-A and the multi-scale FDF family)."""
import logging
from dataclasses import dataclass

from jpeg_model.exceptions import InvalidArgument
from jpeg_model.tables import estimate_quality
from tampering_maps.services import attribute_windows
from tampering_maps.structures import BLOCK

from .features import sliding_windows, window_features
from .registry import AWARE, ClassifierRegistry, select_classifier

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureLayout:
    """How a detector family reads windows: feature shape, window sizes and training qualities."""

    family: str
    n_modes: int
    n_digits: int
    window_sizes: tuple
    qualities: tuple

    @property
    def dims(self):
        return self.n_modes * self.n_digits

    def detector_name(self, window_size):
        return self.family if len(self.window_sizes) == 1 else f'{self.family}-{window_size}'


MULTI_SCALE = FeatureLayout('fdf', 20, 9, (16, 32, 48, 64, 80, 96, 112, 128), tuple(range(50, 101, 5)))
SINGLE_SCALE = FeatureLayout('fdf-a', 9, 3, (64,), tuple(range(50, 96, 5)))
LAYOUTS = {layout.family: layout for layout in (MULTI_SCALE, SINGLE_SCALE)}


def sliding_window_map(j, window_size, stride, model, n_modes=20, n_digits=9, detector=''):
    """Score every window position with ``model`` and average the scores onto blocks."""
    windows = sliding_windows(j.block_grid, window_size, stride)
    scores = model.predict_scores(window_features(j, windows, n_modes, n_digits))
    logger.debug('%s: %d windows of %d px', detector or 'fdf', len(windows), window_size)
    return attribute_windows(zip(windows, scores), j.block_grid, detector)


def fdf_map(j, window_size, registry, mode=AWARE, stride=BLOCK, layout=MULTI_SCALE):
    """Map of one detector of ``layout``; the classifier is picked by the image's estimated Q2."""
    if window_size not in layout.window_sizes:
        raise InvalidArgument(f'{layout.family} has no {window_size} px windows')
    if not isinstance(registry, ClassifierRegistry):
        registry = ClassifierRegistry(registry, layout.family)
    q2 = estimate_quality(j.luminance_table)
    model = select_classifier(registry, window_size, q2, mode)
    if model.dims != layout.dims:
        raise InvalidArgument(f'model has {model.dims} features, {layout.family} needs {layout.dims}')
    return sliding_window_map(j, window_size, stride, model, layout.n_modes, layout.n_digits,
                              layout.detector_name(window_size))


def fdfa_map(j, registry, mode=AWARE, stride=BLOCK):
    return fdf_map(j, 64, registry, mode, stride, SINGLE_SCALE)
