"""Blocking-artifacts-grid detector: pixel-domain 8 px periodicity, scored block by block."""
import logging

import numpy as np
from scipy.ndimage import convolve1d, median_filter

from jpeg_model.exceptions import DegenerateInput, InvalidArgument
from jpeg_model.services import decode_to_pixels
from jpeg_model.structures import PixelImage, QuantizedJpeg
from tampering_maps.services import contrast_reliability, logistic_normalize
from tampering_maps.structures import BLOCK, LogisticParams, TamperingMap

logger = logging.getLogger(__name__)

DETECTOR = 'bag'
PHI = LogisticParams(0.005)
ACCUMULATION = 33
PERIOD_SPAN = 2
MIN_SIDE = 2 * BLOCK

# Median over the same phase two periods either side, and over the whole span.
_PHASE_FOOTPRINT = np.zeros(2 * PERIOD_SPAN * BLOCK + 1, dtype=bool)
_PHASE_FOOTPRINT[::BLOCK] = True
_SPAN_FOOTPRINT = np.ones_like(_PHASE_FOOTPRINT)


def _second_differences(plane, axis):
    values = np.moveaxis(plane, axis, -1)
    diff = np.zeros_like(values)
    diff[..., 1:-1] = np.abs(2.0 * values[..., 1:-1] - values[..., :-2] - values[..., 2:])
    return np.moveaxis(diff, -1, axis)


def _periodic_component(energy, axis):
    shape = [1, 1]
    shape[axis] = _PHASE_FOOTPRINT.size
    phase = median_filter(energy, footprint=_PHASE_FOOTPRINT.reshape(shape), mode='reflect')
    local = median_filter(energy, footprint=_SPAN_FOOTPRINT.reshape(shape), mode='reflect')
    return np.clip(phase - local, 0.0, None)


def _luminance(p):
    if isinstance(p, PixelImage):
        return p.luminance()
    plane = np.asarray(p, dtype=np.float64)
    if plane.ndim != 2:
        raise InvalidArgument(f'expected a luminance plane, got shape {plane.shape}')
    return plane


def compute_bag_image(p):
    """Per-pixel blocking-grid strength of a PixelImage (or a bare luminance plane).

    Second-order differences across columns (rows) are summed over
    ``ACCUMULATION`` pixels along the columns (rows); what repeats with period
    8 beyond the local median survives as grid energy. The horizontal and
    vertical parts are added.
    """
    plane = _luminance(p)
    if min(plane.shape) < MIN_SIDE:
        raise DegenerateInput(f'BAG needs at least {MIN_SIDE}x{MIN_SIDE} px, got {plane.shape[0]}x{plane.shape[1]}')

    bag = np.zeros_like(plane)
    for diff_axis in (0, 1):
        along = 1 - diff_axis
        energy = convolve1d(_second_differences(plane, diff_axis), np.ones(ACCUMULATION), axis=along,
                            mode='nearest')
        bag += _periodic_component(energy, diff_axis)
    return bag


def bag_block_scores(bag, detector=DETECTOR):
    """Interior 6x6 mean minus border-ring mean for each 8x8 block, mapped through the logistic."""
    bag = np.asarray(bag, dtype=np.float64)
    if bag.ndim != 2 or bag.shape[0] % BLOCK or bag.shape[1] % BLOCK or 0 in bag.shape:
        raise InvalidArgument(f'BAG image {bag.shape} does not tile into 8x8 blocks')
    rows, cols = bag.shape[0] // BLOCK, bag.shape[1] // BLOCK
    blocks = bag.reshape(rows, BLOCK, cols, BLOCK)
    interior_sum = blocks[:, 1:-1, :, 1:-1].sum(axis=(1, 3))
    ring_sum = blocks.sum(axis=(1, 3)) - interior_sum
    raw = interior_sum / 36.0 - ring_sum / 28.0
    scores = logistic_normalize(raw, PHI)
    return TamperingMap(scores, detector, contrast_reliability(scores))


def bag_map(image):
    """BAG tampering map of a decoded image or a QuantizedJpeg.

    The BAG image is edge-padded to whole blocks so partial edge blocks get a score.
    """
    if isinstance(image, QuantizedJpeg):
        image = decode_to_pixels(image)
    bag = compute_bag_image(image)
    pad_rows = -bag.shape[0] % BLOCK
    pad_cols = -bag.shape[1] % BLOCK
    if pad_rows or pad_cols:
        bag = np.pad(bag, ((0, pad_rows), (0, pad_cols)), mode='edge')
    result = bag_block_scores(bag)
    logger.debug('BAG map %s, mean score %.4f', result.shape, float(result.scores.mean()))
    return result
