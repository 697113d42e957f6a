"""Per-frequency histograms of quantized AC coefficients."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from jpeg_model.exceptions import DegenerateInput, InvalidArgument
from jpeg_model.services import decode_luminance, quantize_plane
from jpeg_model.structures import readonly
from jpeg_model.tables import ZIGZAG, zigzag_ac_indices

logger = logging.getLogger(__name__)

SHIFT = 4


@dataclass(frozen=True, eq=False)
class CoeffHistogram:
    """Counts of the quantized values ``low .. low + len(counts) - 1`` at one frequency.

    ``frequency`` is the zig-zag position (1..63) of the AC coefficient.
    """

    frequency: int
    low: int
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.float64)
        if counts.ndim != 1 or (counts.size and counts.min() < 0):
            raise InvalidArgument('histogram counts must be a non-negative vector')
        object.__setattr__(self, 'counts', readonly(counts))

    @property
    def total(self):
        return float(self.counts.sum())

    @property
    def high(self):
        return self.low + self.counts.size - 1

    @property
    def bound(self):
        """Largest absolute value with a nonzero count."""
        values = np.flatnonzero(self.counts) + self.low
        return int(np.abs(values).max()) if values.size else 0

    def count(self, x):
        index = np.asarray(x) - self.low
        inside = (index >= 0) & (index < self.counts.size)
        return np.where(inside, self.counts[np.clip(index, 0, max(self.counts.size - 1, 0))], 0.0)

    def over(self, bound):
        """Counts over the symmetric support ``-bound .. bound``."""
        return self.count(np.arange(-bound, bound + 1))


def histogram(values, frequency):
    values = np.asarray(values, dtype=np.int64).ravel()
    if not values.size:
        return CoeffHistogram(frequency, 0, np.zeros(1))
    low = int(values.min())
    return CoeffHistogram(frequency, low, np.bincount(values - low))


def natural_indices(frequencies):
    return ZIGZAG[np.asarray(frequencies, dtype=np.int64)]


def analysed_frequencies(n_freqs):
    """Zig-zag positions 1..n_freqs (the first ``n_freqs`` AC coefficients)."""
    zigzag_ac_indices(n_freqs)
    return list(range(1, n_freqs + 1))


def coefficient_histograms(coefficients, frequencies):
    """One histogram per zig-zag frequency of a (rows, cols, 64) natural-order grid."""
    columns = coefficients.reshape(-1, 64)[:, natural_indices(frequencies)]
    return {f: histogram(columns[:, k], f) for k, f in enumerate(frequencies)}


def observed_histograms(j, frequencies):
    return coefficient_histograms(j.luminance, frequencies)


def shifted_coefficients(j):
    """Luminance coefficients of the decoded image cropped by (4, 4) px and requantized
    with the image's own table; the crop moves the block grid off the stored one."""
    plane = decode_luminance(j)
    rows = (plane.shape[0] - SHIFT) // 8
    cols = (plane.shape[1] - SHIFT) // 8
    if rows < 1 or cols < 1:
        raise DegenerateInput(
            f'{plane.shape[1]}x{plane.shape[0]} px is too small for the shifted estimate (needs 12x12)'
        )
    cropped = plane[SHIFT:SHIFT + rows * 8, SHIFT:SHIFT + cols * 8]
    return quantize_plane(cropped, j.luminance_table)


def estimate_single_histogram(j, frequencies):
    """Histograms a singly compressed version of ``j`` would show, from the shifted image."""
    return coefficient_histograms(shifted_coefficients(j), frequencies)


def smoothed_histogram(h, sigma):
    """Observed histogram blurred across bins, used as a calibration-free reference."""
    bound = h.bound + int(np.ceil(3 * sigma))
    counts = gaussian_filter1d(h.over(bound), sigma, mode='constant')
    counts *= h.total / max(counts.sum(), 1e-12)
    return CoeffHistogram(h.frequency, -bound, counts)


def histogram_rows(observed, estimated):
    """(frequency, bin, observed, estimated) rows over the joint support of each frequency."""
    rows = []
    for frequency in sorted(observed):
        h, e = observed[frequency], estimated[frequency]
        bound = max(h.bound, e.bound)
        for x, o, s in zip(range(-bound, bound + 1), h.over(bound), e.over(bound)):
            rows.append((frequency, x, int(o), int(s)))
    return rows
