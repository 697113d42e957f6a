"""Aligned double-quantization model and the EM fits built on it."""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from jpeg_model.exceptions import InvalidArgument

logger = logging.getLogger(__name__)

ALPHA_FLOOR = 1e-9
PSEUDO_COUNT = 1.0


def _ceil_div(a, b):
    return -(-a // b)


def n_factor(q1_step, q2_step, x):
    """Number of first-pass bins u with round(u * q1_step / q2_step) == x.

    Rounding is half away from zero, as in the encoder. Vectorized over ``x``.
    """
    q1, q2 = int(q1_step), int(q2_step)
    if q1 < 1 or q2 < 1:
        raise InvalidArgument(f'quantization steps must be >= 1, got ({q1_step}, {q2_step})')
    a = np.abs(np.asarray(x, dtype=np.int64))
    upper = _ceil_div((2 * a + 1) * q2, 2 * q1)
    lower = _ceil_div((2 * a - 1) * q2, 2 * q1)
    zero = 2 * _ceil_div(q2, 2 * q1) - 1
    n = np.where(a == 0, zero, upper - lower)
    return int(n) if n.ndim == 0 else n


@dataclass(frozen=True)
class DoubleQuantModel:
    q1_step: int
    q2_step: int

    def __post_init__(self):
        if int(self.q1_step) < 1 or int(self.q2_step) < 1:
            raise InvalidArgument('quantization steps must be >= 1')

    def n(self, x):
        return n_factor(self.q1_step, self.q2_step, x)

    @property
    def is_trivial(self):
        """Requantization with the same step leaves every bin alone."""
        return self.q1_step == self.q2_step


def support(bound):
    return np.arange(-bound, bound + 1)


def single_probabilities(reference):
    """Laplace-smoothed single-compression model over the reference's support."""
    weights = np.asarray(reference, dtype=np.float64) + PSEUDO_COUNT
    return weights / weights.sum()


def double_probabilities(reference, model):
    """Double-compression model n(x) * h(x), smoothed like the single model.

    ``reference`` covers the symmetric support ``-B..B``; the zero bin keeps
    the reference count for both models.
    """
    reference = np.asarray(reference, dtype=np.float64)
    bound = (reference.size - 1) // 2
    n = np.asarray(model.n(support(bound)), dtype=np.float64)
    n[bound] = 1.0
    weights = n * reference + PSEUDO_COUNT
    return weights / weights.sum()


@dataclass
class MixtureFit:
    """EM result: ``alpha`` is the weight of the double-compression component."""

    alpha: float
    log_likelihood: float
    converged: bool
    iterations: int
    trace: list = field(default_factory=list)


def fit_mixture(counts, p_double, p_single, alpha=0.5, tol=1e-4, max_iter=100):
    """Fit the weight of ``p_double`` in alpha * p_double + (1 - alpha) * p_single to binned counts.

    The log-likelihood after every iteration is kept in ``trace``.
    """
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return MixtureFit(alpha, 0.0, True, 0, [0.0])
    log_d, log_s = np.log(p_double), np.log(p_single)

    def log_likelihood(a):
        return float(counts @ np.logaddexp(np.log(a) + log_d, np.log1p(-a) + log_s))

    trace = [log_likelihood(alpha)]
    for iteration in range(1, max_iter + 1):
        responsibility = expit(np.log(alpha) + log_d - np.log1p(-alpha) - log_s)
        updated = float(np.clip(counts @ responsibility / total, ALPHA_FLOOR, 1 - ALPHA_FLOOR))
        change = abs(updated - alpha)
        alpha = updated
        trace.append(log_likelihood(alpha))
        if change < tol:
            return MixtureFit(alpha, trace[-1], True, iteration, trace)
    return MixtureFit(alpha, trace[-1], False, max_iter, trace)


def fit_block_mixture(log_double, log_single, alpha=0.5, tol=1e-4, max_iter=100):
    """Same EM over blocks: each block is wholly double (background) or single compressed.

    ``log_double``/``log_single`` are per-block log-likelihoods summed over frequencies.
    """
    log_double = np.asarray(log_double, dtype=np.float64).ravel()
    log_single = np.asarray(log_single, dtype=np.float64).ravel()
    if not log_double.size:
        return MixtureFit(alpha, 0.0, True, 0, [0.0])

    def log_likelihood(a):
        return float(np.logaddexp(np.log(a) + log_double, np.log1p(-a) + log_single).sum())

    trace = [log_likelihood(alpha)]
    for iteration in range(1, max_iter + 1):
        responsibility = expit(np.log(alpha) + log_double - np.log1p(-alpha) - log_single)
        updated = float(np.clip(responsibility.mean(), ALPHA_FLOOR, 1 - ALPHA_FLOOR))
        change = abs(updated - alpha)
        alpha = updated
        trace.append(log_likelihood(alpha))
        if change < tol:
            return MixtureFit(alpha, trace[-1], True, iteration, trace)
    logger.debug('Block mixture did not converge in %d iterations (alpha %.4f)', max_iter, alpha)
    return MixtureFit(alpha, trace[-1], False, max_iter, trace)


@dataclass(frozen=True)
class StepEstimate:
    """Most likely first-pass step at one frequency and its gain over single compression (nats)."""

    frequency: int
    q2_step: int
    q1_step: int
    gain: float
    alpha: float

    def model(self, informative=True):
        step = self.q1_step if informative else self.q2_step
        return DoubleQuantModel(step, self.q2_step)


def estimate_step(observed, reference, q2_step, frequency=0, max_step=32):
    """Try every first-pass step in 1..max_step (except q2_step) as the double component.

    ``observed`` and ``reference`` are counts over the same symmetric support.
    Returns the best-fitting step; its ``gain`` is the log-likelihood improvement
    over the single model alone.
    """
    observed = np.asarray(observed, dtype=np.float64)
    p_single = single_probabilities(reference)
    baseline = float(observed @ np.log(p_single))
    best = StepEstimate(frequency, q2_step, q2_step, 0.0, 0.0)
    for step in range(1, max_step + 1):
        if step == q2_step:
            continue
        p_double = double_probabilities(reference, DoubleQuantModel(step, q2_step))
        fit = fit_mixture(observed, p_double, p_single)
        gain = fit.log_likelihood - baseline
        if gain > best.gain:
            best = StepEstimate(frequency, q2_step, step, gain, fit.alpha)
    logger.debug('Frequency %d: q1 step %d (q2 step %d), gain %.1f nats', frequency, best.q1_step, q2_step,
                 best.gain)
    return best
