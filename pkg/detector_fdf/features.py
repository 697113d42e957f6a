"""Mode-based first-digit features of quantized DCT coefficients."""
import numpy as np

from detector_cda.histograms import natural_indices
from jpeg_model.exceptions import DegenerateInput, InvalidArgument
from tampering_maps.services import check_window
from tampering_maps.structures import BLOCK, WindowRect


def first_digits(values):
    """Leading decimal digit of |v| for every element; 0 marks a zero coefficient."""
    digits = np.abs(np.asarray(values, dtype=np.int64))
    while True:
        large = digits >= 10
        if not large.any():
            return digits
        digits = np.where(large, digits // 10, digits)


def first_digit(v):
    digit = int(first_digits(v))
    return digit or None


def _digit_tallies(coefficients, n_modes, n_digits):
    """Per block: counts of digits 1..n_digits and of nonzero values for each of the first AC modes."""
    modes = coefficients[..., natural_indices(range(1, n_modes + 1))]
    digits = first_digits(modes)
    tallies = (digits[..., None] == np.arange(1, n_digits + 1)).astype(np.int64)
    return tallies, (digits > 0).astype(np.int64)


def _integral(counts):
    padded = np.zeros((counts.shape[0] + 1, counts.shape[1] + 1) + counts.shape[2:], dtype=np.int64)
    padded[1:, 1:] = counts.cumsum(axis=0).cumsum(axis=1)
    return padded


def _window_sums(integral, rows0, cols0, rows1, cols1):
    return integral[rows1, cols1] - integral[rows0, cols1] - integral[rows1, cols0] + integral[rows0, cols0]


def window_features(j, windows, n_modes=20, n_digits=9):
    """(windows, n_modes * n_digits) digit frequencies, mode-major.

    Each mode's frequencies are relative to its nonzero coefficients inside
    the window; a mode with no nonzero coefficient contributes zeros.
    """
    if not 1 <= n_modes <= 63 or not 1 <= n_digits <= 9:
        raise InvalidArgument(f'invalid feature layout {n_modes} modes x {n_digits} digits')
    coefficients = j.luminance
    for rect in windows:
        check_window(rect, coefficients.shape[:2])
    tallies, nonzero = _digit_tallies(coefficients, n_modes, n_digits)
    bounds = np.array([(r.top, r.top + r.height, r.left, r.left + r.width) for r in windows],
                      dtype=np.int64).reshape(-1, 4) // BLOCK
    rows0, rows1, cols0, cols1 = bounds.T
    counts = _window_sums(_integral(tallies), rows0, cols0, rows1, cols1).astype(np.float64)
    totals = _window_sums(_integral(nonzero), rows0, cols0, rows1, cols1).astype(np.float64)
    frequencies = np.divide(counts, totals[..., None], out=np.zeros_like(counts), where=totals[..., None] > 0)
    return frequencies.reshape(len(windows), n_modes * n_digits)


def extract_features(j, rect, n_modes=20, n_digits=9):
    return window_features(j, [rect], n_modes, n_digits)[0]


def _positions(blocks, size, stride):
    positions = list(range(0, blocks - size + 1, stride))
    if positions[-1] != blocks - size:
        positions.append(blocks - size)
    return positions


def sliding_windows(grid, window_size, stride=BLOCK):
    """Every window position on the block grid; a last window flush with the far edge
    is added when the stride does not land there."""
    if window_size <= 0 or window_size % BLOCK or stride <= 0 or stride % BLOCK:
        raise InvalidArgument(f'window {window_size} px and stride {stride} px must be positive multiples of 8')
    rows, cols = grid
    size = window_size // BLOCK
    if rows < size or cols < size:
        raise DegenerateInput(f'a {rows * BLOCK}x{cols * BLOCK} px grid cannot hold a {window_size} px window')
    step = stride // BLOCK
    return [
        WindowRect(top * BLOCK, left * BLOCK, window_size, window_size)
        for top in _positions(rows, size, step)
        for left in _positions(cols, size, step)
    ]
