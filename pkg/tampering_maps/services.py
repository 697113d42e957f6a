"""Score normalization, window-to-block attribution and mask reduction."""
import logging

import numpy as np
from scipy.special import expit

from jpeg_model.exceptions import InvalidArgument
from jpeg_model.structures import ceil_div

from .structures import BLOCK, GroundTruthMask, LogisticParams, TamperingMap

logger = logging.getLogger(__name__)

NEUTRAL = 0.5


def logistic_normalize(x, params):
    """1 / (1 + exp(-phi1 * (x + phi2))), elementwise; saturates instead of overflowing."""
    if isinstance(params, tuple):
        params = LogisticParams(*params)
    return expit(params.phi1 * (np.asarray(x, dtype=np.float64) + params.phi2))


def contrast_reliability(scores):
    """Mean absolute deviation from 0.5, rescaled to [0, 1].

    A map of noise around 0.5 scores close to 0; a confident binary map
    scores 1. Neutral (uncovered) blocks pull the value down.
    """
    scores = np.asarray(scores, dtype=np.float64)
    value = float(2.0 * np.abs(scores - NEUTRAL).mean())
    return min(1.0, max(0.0, value))


def block_grid_shape(height, width):
    return ceil_div(height, BLOCK), ceil_div(width, BLOCK)


def check_window(rect, grid):
    rows, cols = grid
    if min(rect.top, rect.left) < 0 or rect.height <= 0 or rect.width <= 0:
        raise InvalidArgument(f'invalid window {rect}')
    if any(v % BLOCK for v in (rect.top, rect.left, rect.height, rect.width)):
        raise InvalidArgument(f'window {rect} is not aligned to the 8 px block grid')
    if rect.top + rect.height > rows * BLOCK or rect.left + rect.width > cols * BLOCK:
        raise InvalidArgument(f'window {rect} exceeds the {rows}x{cols} block grid')


def window_coverage(windows, grid):
    """Number of windows covering each block."""
    coverage = np.zeros(grid, dtype=np.int64)
    for rect in windows:
        check_window(rect, grid)
        coverage[rect.blocks()] += 1
    return coverage


def attribute_windows(window_scores, grid, detector=''):
    """Average window scores onto the blocks each window covers.

    Blocks that no window covers get the neutral score 0.5 and lower the
    map's reliability in proportion to the uncovered area.
    """
    rows, cols = grid
    totals = np.zeros((rows, cols))
    counts = np.zeros((rows, cols), dtype=np.int64)
    for rect, score in window_scores:
        check_window(rect, grid)
        score = float(score)
        if not 0 <= score <= 1:
            raise InvalidArgument(f'window score {score} outside [0, 1]')
        block_slice = rect.blocks()
        totals[block_slice] += score
        counts[block_slice] += 1

    covered = counts > 0
    if not covered.any():
        logger.debug('No windows to attribute onto a %dx%d grid', rows, cols)
        return TamperingMap(np.full((rows, cols), NEUTRAL), detector, 0.0)
    scores = np.full((rows, cols), NEUTRAL)
    scores[covered] = totals[covered] / counts[covered]
    return TamperingMap(np.clip(scores, 0.0, 1.0), detector, contrast_reliability(scores))


def block_majority(pixel_mask, threshold=0.5):
    """Reduce a pixel mask to a block mask: a block is tampered when the masked
    fraction of its pixels is at least ``threshold``.

    Partial blocks on the right/bottom edges are judged on the pixels present.
    """
    if not 0 < threshold <= 1:
        raise InvalidArgument(f'majority threshold must lie in (0, 1], got {threshold}')
    mask = np.asarray(pixel_mask).astype(bool)
    if mask.ndim != 2 or 0 in mask.shape:
        raise InvalidArgument(f'pixel mask must be a non-empty 2-D array, got shape {mask.shape}')
    rows, cols = block_grid_shape(*mask.shape)
    padded = np.zeros((rows * BLOCK, cols * BLOCK))
    present = np.zeros_like(padded)
    padded[:mask.shape[0], :mask.shape[1]] = mask
    present[:mask.shape[0], :mask.shape[1]] = 1
    masked = padded.reshape(rows, BLOCK, cols, BLOCK).sum(axis=(1, 3))
    total = present.reshape(rows, BLOCK, cols, BLOCK).sum(axis=(1, 3))
    return GroundTruthMask(masked >= threshold * total)
