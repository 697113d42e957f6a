"""CDA, I-CDA and BG-CDA tampering maps from DCT coefficient statistics."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from benchmark.pipeline import write_csv
from tampering_maps.services import contrast_reliability, logistic_normalize
from tampering_maps.structures import LogisticParams, TamperingMap

from .histograms import (
    analysed_frequencies,
    estimate_single_histogram,
    histogram_rows,
    natural_indices,
    observed_histograms,
    smoothed_histogram,
)
from .mixture import double_probabilities, estimate_step, fit_block_mixture, n_factor, single_probabilities

logger = logging.getLogger(__name__)

MIN_GAIN = 10.0
MAX_STEP = 32
EPSILON = 1e-3
SMOOTHING = 1.5
BGCDA_PHI = LogisticParams(0.05, 60.0)


@dataclass(frozen=True)
class FrequencyModel:
    """Single and double compression log-probabilities of one frequency over ``-bound..bound``."""

    frequency: int
    bound: int
    q1_step: int
    q2_step: int
    gain: float
    informative: bool
    log_single: np.ndarray
    log_double: np.ndarray

    def lookup(self, values):
        index = np.clip(np.asarray(values, dtype=np.int64), -self.bound, self.bound) + self.bound
        return self.log_single[index], self.log_double[index]


def frequency_models(j, frequencies, references, min_gain=MIN_GAIN, max_step=MAX_STEP):
    """Estimate the first-pass step of every frequency against ``references``.

    Frequencies whose best double-compression fit gains less than ``min_gain``
    nats get identical single and double models.
    """
    observed = observed_histograms(j, frequencies)
    models = []
    for frequency in frequencies:
        h, reference = observed[frequency], references[frequency]
        bound = max(h.bound, reference.bound)
        counts, reference_counts = h.over(bound), reference.over(bound)
        q2_step = j.luminance_table.step(frequency)
        estimate = estimate_step(counts, reference_counts, q2_step, frequency, max_step)
        informative = estimate.gain >= min_gain
        model = estimate.model(informative)
        models.append(FrequencyModel(
            frequency, bound, model.q1_step, q2_step, estimate.gain, informative,
            np.log(single_probabilities(reference_counts)),
            np.log(double_probabilities(reference_counts, model)),
        ))
    informative = [m.frequency for m in models if m.informative]
    logger.debug('Informative frequencies: %s', informative)
    return models


def block_values(j, frequencies):
    """(blocks, frequencies) matrix of quantized luminance AC values."""
    return j.luminance.reshape(-1, 64)[:, natural_indices(frequencies)].astype(np.int64)


def block_log_likelihoods(values, models):
    log_single = np.zeros(values.shape[0])
    log_double = np.zeros(values.shape[0])
    for k, model in enumerate(models):
        s, d = model.lookup(values[:, k])
        log_single += s
        log_double += d
    return log_single, log_double


def posterior_scores(log_single, log_double):
    """P(tampered | x) = p1 / (p1 + p0) with p1 the single and p0 the double likelihood."""
    return expit(np.asarray(log_single, dtype=np.float64) - np.asarray(log_double, dtype=np.float64))


def icda_block_scores(values, q1_steps, q2_steps, epsilon=EPSILON):
    """Inverse product of n(x) over the nonzero values of each block, through a unit logistic.

    A value no first-pass bin maps to (n = 0) pushes the block towards 1.
    Blocks without nonzero values score 0.5.
    """
    values = np.asarray(values, dtype=np.int64)
    log_product = np.zeros(values.shape[0])
    for k, (q1, q2) in enumerate(zip(q1_steps, q2_steps)):
        column = values[:, k]
        n = np.maximum(n_factor(q1, q2, column).astype(np.float64), epsilon)
        log_product += np.where(column != 0, np.log(n), 0.0)
    return expit(-log_product)


def _map(scores, grid, detector, reliability=None):
    scores = np.asarray(scores).reshape(grid)
    if reliability is None:
        reliability = contrast_reliability(scores)
    return TamperingMap(scores, detector, reliability)


def cda_map(j, n_freqs=15, smoothing=SMOOTHING, min_gain=MIN_GAIN, max_step=MAX_STEP):
    """Per-block posterior of single compression, with the blurred observed histograms as reference."""
    frequencies = analysed_frequencies(n_freqs)
    observed = observed_histograms(j, frequencies)
    references = {f: smoothed_histogram(h, smoothing) for f, h in observed.items()}
    models = frequency_models(j, frequencies, references, min_gain, max_step)
    log_single, log_double = block_log_likelihoods(block_values(j, frequencies), models)
    return _map(posterior_scores(log_single, log_double), j.block_grid, 'cda')


def icda_map(j, n_freqs=15, min_gain=MIN_GAIN, max_step=MAX_STEP):
    """Requantization-factor detector against the shifted single-compression estimate."""
    frequencies = analysed_frequencies(n_freqs)
    models = frequency_models(j, frequencies, estimate_single_histogram(j, frequencies), min_gain, max_step)
    scores = icda_block_scores(
        block_values(j, frequencies), [m.q1_step for m in models], [m.q2_step for m in models],
    )
    return _map(scores, j.block_grid, 'icda')


def bgcda_map(j, n_freqs=6, min_gain=MIN_GAIN, max_step=MAX_STEP, max_iter=100):
    """Per-block log-likelihood ratio of single vs double compression, normalized.

    The ratio is taken single over double (log p_single - log p_double) so
    that, like the other detectors, high scores mean tampered: a pasted
    region is singly compressed while the background is compressed twice.
    The block-level mixture is fitted by EM; a fit that does not converge
    leaves the map in place with reliability 0.
    """
    frequencies = analysed_frequencies(n_freqs)
    models = frequency_models(j, frequencies, estimate_single_histogram(j, frequencies), min_gain, max_step)
    log_single, log_double = block_log_likelihoods(block_values(j, frequencies), models)
    llr = log_single - log_double
    scores = logistic_normalize(llr, BGCDA_PHI)
    fit = fit_block_mixture(log_double, log_single, max_iter=max_iter)
    logger.debug('BG-CDA background weight %.4f after %d iterations', fit.alpha, fit.iterations)
    if not fit.converged:
        logger.warning('BG-CDA mixture did not converge after %d iterations', fit.iterations)
        return _map(scores, j.block_grid, 'bgcda', 0.0)
    return _map(scores, j.block_grid, 'bgcda')


def dump_histograms(j, path, n_freqs=6, config_hash=None):
    """Observed vs shifted-estimate histograms as CSV (frequency, bin, observed, estimated)."""
    frequencies = analysed_frequencies(n_freqs)
    rows = histogram_rows(observed_histograms(j, frequencies), estimate_single_histogram(j, frequencies))
    write_csv(path, ('frequency', 'bin', 'observed', 'estimated'), rows, config_hash)
    return len(rows)
