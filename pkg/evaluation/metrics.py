"""Threshold sweep, binary-map cleanup, confusion counts and partial ROC areas."""
import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.ndimage import label

from jpeg_model.exceptions import InvalidArgument
from tampering_maps.services import block_majority
from tampering_maps.structures import GroundTruthMask, TamperingMap

from .structures import ConfusionCounts, RocSample

THRESHOLDS = tuple(k / 40 for k in range(1, 40))
MIN_COMPONENT = 4
QUADRATURE_TOLERANCE = 1e-6
ROC_ANCHORS = ((0.0, 0.0), (1.0, 1.0))

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def _scores(m):
    return m.scores if isinstance(m, TamperingMap) else np.asarray(m, dtype=np.float64)


def threshold_sweep(m, thresholds=THRESHOLDS):
    """One binary map per threshold; a block is positive when its score is at least the threshold."""
    scores = _scores(m)
    return [scores >= tau for tau in thresholds]


def clean_binary_map(binary, min_size=MIN_COMPONENT):
    """Drop 8-connected components of positive blocks smaller than ``min_size``."""
    binary = np.asarray(binary, dtype=bool)
    components, count = label(binary, structure=_EIGHT_CONNECTED)
    if not count:
        return binary.copy()
    sizes = np.bincount(components.ravel())
    keep = sizes >= min_size
    keep[0] = False
    return keep[components]


def downsample_mask(pixel_mask):
    """Block-resolution ground truth by per-block majority (1920x1080 px -> 240x135 blocks)."""
    return block_majority(pixel_mask, 0.5)


def confusion(binary, gt):
    cells = gt.cells if isinstance(gt, GroundTruthMask) else np.asarray(gt, dtype=bool)
    binary = np.asarray(binary, dtype=bool)
    if binary.shape != cells.shape:
        raise InvalidArgument(f'decision map {binary.shape} and mask {cells.shape} differ in size')
    return ConfusionCounts(
        tp=int(np.count_nonzero(binary & cells)),
        fp=int(np.count_nonzero(binary & ~cells)),
        tn=int(np.count_nonzero(~binary & ~cells)),
        fn=int(np.count_nonzero(~binary & cells)),
    )


def roc_samples(m, gt, clean=True, thresholds=THRESHOLDS):
    samples = []
    for tau, binary in zip(thresholds, threshold_sweep(m, thresholds)):
        if clean:
            binary = clean_binary_map(binary)
        counts = confusion(binary, gt)
        samples.append(RocSample(tau, counts.fp_rate, counts.tp_rate, counts.f1))
    return samples


def roc_points(samples, anchors=ROC_ANCHORS):
    """Sorted unique (fp, tp) knots with the curve anchors; repeated fp keep their largest tp."""
    best = {}
    for fp, tp in [(s.fp_rate, s.tp_rate) for s in samples] + list(anchors):
        best[fp] = max(tp, best.get(fp, 0.0))
    fps = np.array(sorted(best))
    return fps, np.array([best[fp] for fp in fps])


def pchip_curve(samples):
    """Shape-preserving interpolant of tp over fp on [0, 1]."""
    fps, tps = roc_points(samples)
    return PchipInterpolator(fps, tps, extrapolate=False)


def auc(curve, fp_cap):
    """Area under ``curve`` on [0, fp_cap], divided by ``fp_cap``."""
    if not 0 < fp_cap <= 1:
        raise InvalidArgument(f'false-positive cap must lie in (0, 1], got {fp_cap}')
    knots = [x for x in getattr(curve, 'x', ()) if 0 < x < fp_cap]
    area, _ = quad(lambda fp: float(curve(fp)), 0.0, fp_cap, points=knots or None,
                   epsabs=QUADRATURE_TOLERANCE, epsrel=QUADRATURE_TOLERANCE, limit=200)
    return min(1.0, max(0.0, area / fp_cap))
