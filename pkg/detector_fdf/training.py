"""Training sets of singly vs doubly compressed windows, and registry training."""
import logging
from functools import partial

import numpy as np

from benchmark.pipeline import run_parallel
from jpeg_model.services import decode_to_pixels, encode, parse_jpeg

from .classifiers import SVM_RBF, train_classifier
from .features import sliding_windows, window_features
from .registry import OBLIVIOUS

logger = logging.getLogger(__name__)

SINGLE, DOUBLE = 1, 0
DEFAULT_CAP = 2000
FIRST_QUALITIES = tuple(range(50, 101))


def compression_pair(image, q1, q2):
    """The image compressed once at q2, and at q1 then q2 on the same grid."""
    single = parse_jpeg(encode(image, q2))
    double = parse_jpeg(encode(decode_to_pixels(parse_jpeg(encode(image, q1))), q2))
    return single, double


def training_set(images, window_size, layout, q2=None, rng=None, cap=DEFAULT_CAP):
    """Labelled tiled-window features; ``q2=None`` draws Q2 per image (oblivious training).

    Q1 is drawn from 50..100, never equal to Q2; each class stops at ``cap`` samples.
    """
    rng = rng or np.random.default_rng(0)
    features = {SINGLE: [], DOUBLE: []}
    for image in images:
        if min(len(features[SINGLE]), len(features[DOUBLE])) >= cap:
            break
        target = int(rng.choice(layout.qualities)) if q2 is None else q2
        q1 = int(rng.choice([q for q in FIRST_QUALITIES if q != target]))
        for label, j in zip((SINGLE, DOUBLE), compression_pair(image, q1, target)):
            windows = sliding_windows(j.block_grid, window_size, window_size)
            room = cap - len(features[label])
            if room > 0:
                features[label].extend(window_features(j, windows, layout.n_modes, layout.n_digits)[:room])
    X = np.array(features[SINGLE] + features[DOUBLE]).reshape(-1, layout.dims)
    y = np.array([SINGLE] * len(features[SINGLE]) + [DOUBLE] * len(features[DOUBLE]))
    return X, y


def train_detector(images, window_size, layout, key, seed=0, cap=DEFAULT_CAP, family=SVM_RBF):
    """One classifier for ``window_size``; ``key`` is a target Q2 or ``'oblivious'``."""
    rng = np.random.default_rng(seed)
    q2 = None if key == OBLIVIOUS else int(key)
    X, y = training_set(images, window_size, layout, q2, rng, cap)
    metadata = {
        'window': window_size, 'q2': key if q2 is None else q2,
        'n_modes': layout.n_modes, 'n_digits': layout.n_digits, 'layout': layout.family,
    }
    return train_classifier(X, y, family, seed, metadata=metadata)


def _train_job(job, images, layout, cap, family):
    window_size, key, seed = job
    return train_detector(images, window_size, layout, key, seed, cap, family)


def train_registry(registry, images, layout, window_sizes=None, qualities=None, oblivious=True, seed=0,
                   cap=DEFAULT_CAP, family=SVM_RBF, workers=1, force=True):
    """Train and save every (window, key) model; returns the (job, error) pairs that failed.

    With ``force=False`` models already in the registry are kept as they are.
    """
    window_sizes = list(window_sizes or layout.window_sizes)
    keys = list(qualities or layout.qualities) + ([OBLIVIOUS] if oblivious else [])
    jobs = [
        (window, key, int(np.random.SeedSequence([seed, window, index]).generate_state(1)[0]))
        for window in window_sizes for index, key in enumerate(keys)
    ]
    if not force:
        jobs = [job for job in jobs if not registry.path(job[0], job[1]).exists()]
    images = list(images)
    worker = partial(_train_job, images=images, layout=layout, cap=cap, family=family)
    failures = []
    for job, model, error in run_parallel(worker, jobs, workers):
        if error is not None:
            failures.append((job, error))
            continue
        registry.save(model, job[0], job[1])
    logger.info('Trained %d of %d %s models', len(jobs) - len(failures), len(jobs), layout.family)
    return failures
