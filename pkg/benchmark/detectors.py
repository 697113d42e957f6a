"""Detector names the pipeline can run, and how each one is invoked."""
from functools import partial

from detector_bag.services import bag_map
from detector_cda.services import bgcda_map, cda_map, icda_map
from detector_fdf.registry import AWARE, ClassifierRegistry
from detector_fdf.services import MULTI_SCALE, SINGLE_SCALE, fdf_map, fdfa_map
from fusion.services import FUSED

_PLAIN = {'bag': bag_map, 'cda': cda_map, 'icda': icda_map, 'bgcda': bgcda_map}
_WINDOWED = {MULTI_SCALE.detector_name(size): size for size in MULTI_SCALE.window_sizes}
KNOWN_DETECTORS = tuple(_PLAIN) + (SINGLE_SCALE.family,) + tuple(_WINDOWED)


def needs_registry(name):
    return name not in _PLAIN


def is_fused(name):
    return name == FUSED


def detector(name, models_dir=None, mode=AWARE, stride=8):
    """Callable mapping a QuantizedJpeg to the named detector's TamperingMap."""
    if name in _PLAIN:
        return _PLAIN[name]
    if name == SINGLE_SCALE.family:
        return partial(fdfa_map, registry=ClassifierRegistry(models_dir, SINGLE_SCALE.family), mode=mode,
                       stride=stride)
    if name in _WINDOWED:
        registry = ClassifierRegistry(models_dir, MULTI_SCALE.family)
        return partial(fdf_map, window_size=_WINDOWED[name], registry=registry, mode=mode, stride=stride)
    raise KeyError(name)
