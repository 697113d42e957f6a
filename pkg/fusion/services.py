"""Random-field fusion of candidate tampering maps.

Candidates are combined into a weighted mean score per block and a binary
labelling is chosen by minimizing a Potts energy over the 8-neighbourhood
with iterated conditional modes. Candidate weights are re-estimated from
their agreement with the current labelling until the labelling settles.
"""
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.ndimage import convolve
from scipy.special import softmax

from evaluation.metrics import THRESHOLDS
from jpeg_model.exceptions import InvalidArgument, NotFound
from tampering_maps.services import NEUTRAL, contrast_reliability
from tampering_maps.structures import TamperingMap

from .structures import FusionParams, FusionResult

logger = logging.getLogger(__name__)

PRESETS_FILE = Path(__file__).resolve().parent / 'presets.toml'
FUSED = 'fdf-fuse'
ALPHA_SCALE = 0.1
MAX_ITERS = 10
MAX_SWEEPS = 50

_NEIGHBOURS = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]])
# Sites sharing a (row, col) parity are never 8-neighbours, so each phase updates independently.
_PHASES = ((0, 0), (0, 1), (1, 0), (1, 1))


@lru_cache(maxsize=None)
def load_presets(path=PRESETS_FILE):
    with open(path, 'rb') as handle:
        raw = tomllib.load(handle)
    return {name: FusionParams(**values) for name, values in raw.items()}


def preset(name):
    presets = load_presets()
    if name not in presets:
        raise NotFound(f'no fusion preset {name!r}; known presets: {", ".join(sorted(presets))}')
    return presets[name]


def _reliability(candidate):
    if candidate.reliability is None:
        return contrast_reliability(candidate.scores)
    return candidate.reliability


def check_candidates(candidates):
    candidates = list(candidates)
    if not candidates:
        raise InvalidArgument('fusion needs at least one candidate map')
    shape = candidates[0].shape
    for candidate in candidates[1:]:
        if candidate.shape != shape:
            raise InvalidArgument(f'candidate {candidate.detector or "map"} is {candidate.shape}, expected {shape}')
    return candidates


def reject_candidates(candidates, rho):
    """Indices of the candidates whose reliability is at least ``rho``, and a fallback flag.

    When every candidate is rejected the single most reliable one is kept
    (the first on ties) and the flag is set. Candidates without a
    reliability are judged by their contrast.
    """
    candidates = check_candidates(candidates)
    reliabilities = [_reliability(c) for c in candidates]
    retained = [i for i, value in enumerate(reliabilities) if value >= rho]
    if retained:
        return retained, False
    best = int(np.argmax(reliabilities))
    logger.debug('All %d candidates below rho=%.3f; keeping %s', len(candidates), rho,
                 candidates[best].detector or best)
    return [best], True


def weighted_mean(stack, weights):
    """s_0 + sum_k w_k (s_k - s_0); exact when all candidates agree."""
    base = stack[0]
    return base + np.tensordot(weights, stack - base, axes=1)


def drift_modulation(mean_scores):
    """Share of the threshold drift applied per block: 1 at 0.5, falling to 0 at confident scores."""
    return 1.0 - 2.0 * np.abs(np.asarray(mean_scores) - NEUTRAL)


def unary_terms(mean_scores, params):
    """Energy of labelling each block tampered; labelling it authentic costs 0."""
    threshold = params.tau + params.alpha * ALPHA_SCALE + params.delta * drift_modulation(mean_scores)
    return -(mean_scores - threshold)


def disagreements(labels):
    """Number of 8-neighbour pairs with different labels, each pair counted once."""
    return int(
        np.count_nonzero(labels[:, 1:] != labels[:, :-1])
        + np.count_nonzero(labels[1:, :] != labels[:-1, :])
        + np.count_nonzero(labels[1:, 1:] != labels[:-1, :-1])
        + np.count_nonzero(labels[1:, :-1] != labels[:-1, 1:])
    )


def energy(labels, unary, beta):
    labels = np.asarray(labels, dtype=bool)
    return float(unary[labels].sum()) + beta * disagreements(labels)


def initial_labelling(unary, beta):
    """Lowest-energy labelling among unary thresholding, all authentic and all tampered."""
    options = [unary < 0, np.zeros(unary.shape, dtype=bool), np.ones(unary.shape, dtype=bool)]
    energies = [energy(labels, unary, beta) for labels in options]
    return options[int(np.argmin(energies))]


def icm(labels, unary, beta, max_sweeps=MAX_SWEEPS):
    """Iterated conditional modes until no label flips or ``max_sweeps``.

    A block becomes tampered only when that strictly lowers the energy.
    Returns the labelling and the energy before the first and after every
    sweep.
    """
    labels = np.array(labels, dtype=bool)
    neighbours = convolve(np.ones(labels.shape), _NEIGHBOURS, mode='constant')
    trace = [energy(labels, unary, beta)]
    for _ in range(max_sweeps):
        flips = 0
        for row, col in _PHASES:
            tampered = convolve(labels.astype(np.float64), _NEIGHBOURS, mode='constant')
            delta = unary + beta * (neighbours - 2.0 * tampered)
            sites = (slice(row, None, 2), slice(col, None, 2))
            update = delta[sites] < 0
            flips += int(np.count_nonzero(update != labels[sites]))
            labels[sites] = update
        trace.append(energy(labels, unary, beta))
        if not flips:
            break
    logger.debug('ICM: %d sweeps, energy %.4f -> %.4f', len(trace) - 1, trace[0], trace[-1])
    return labels, trace


def agreement_weights(stack, labels):
    """Softmax over candidates of the mean agreement 1 - |score - label|."""
    agreement = 1.0 - np.abs(stack - labels.astype(np.float64)).mean(axis=(1, 2))
    return softmax(agreement)


def fuse_em(candidates, params, max_iters=MAX_ITERS, max_sweeps=MAX_SWEEPS):
    """Fuse candidate maps into one binary decision map.

    Candidates below ``params.rho`` are rejected first. The labelling starts
    from ICM under uniform weights. Each iteration re-estimates the weights
    from agreement with the current labelling, rebuilds the weighted mean
    and relabels with ICM; the loop has converged when that relabelling
    equals the labelling it started from. Otherwise the lowest-energy
    labelling seen is returned with its weights and ``converged=False``.
    """
    if max_iters < 1:
        raise InvalidArgument(f'max_iters must be positive, got {max_iters}')
    candidates = check_candidates(candidates)
    retained, fallback = reject_candidates(candidates, params.rho)
    stack = np.stack([candidates[i].scores for i in retained])
    weights = np.full(len(retained), 1.0 / len(retained))

    unary = unary_terms(weighted_mean(stack, weights), params)
    labels, trace = icm(initial_labelling(unary, params.beta), unary, params.beta, max_sweeps)
    best = (trace[-1], labels, weights, trace)
    converged = False
    for iteration in range(1, max_iters + 1):
        weights = agreement_weights(stack, labels)
        unary = unary_terms(weighted_mean(stack, weights), params)
        relabelled, trace = icm(labels, unary, params.beta, max_sweeps)
        if trace[-1] < best[0]:
            best = (trace[-1], relabelled, weights, trace)
        settled = np.array_equal(relabelled, labels)
        labels = relabelled
        if settled:
            converged = True
            break
    if not converged:
        logger.debug('Fusion did not settle within %d iterations; keeping energy %.4f', max_iters, best[0])
        _, labels, weights, trace = best
    return FusionResult(labels, weights, iteration, converged, retained, fallback, trace)


def fused_map(candidates, params, thresholds=THRESHOLDS, detector=FUSED, max_iters=MAX_ITERS):
    """Sweep the base threshold and pack the decisions into one map.

    A block scores the highest threshold at which it was labelled tampered
    (0 if never), so thresholding the packed map at any swept value gives
    back that fusion's decision when the decisions are nested.
    """
    candidates = check_candidates(candidates)
    packed = np.zeros(candidates[0].shape)
    for tau in sorted(thresholds):
        result = fuse_em(candidates, params.with_tau(tau), max_iters)
        packed[result.labels] = tau
    return TamperingMap(packed, detector, contrast_reliability(packed))
