"""Window classifiers: RBF support vector machines with Platt-style calibration."""
import io
import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.metrics.pairwise import rbf_kernel
from sklearn.svm import SVC

from jpeg_model.exceptions import InvalidArgument
from tampering_maps.services import logistic_normalize
from tampering_maps.structures import LogisticParams

logger = logging.getLogger(__name__)

SVM_RBF = 'svm-rbf'
LOGISTIC = 'logistic'
FAMILIES = (SVM_RBF, LOGISTIC)
UNCALIBRATED = LogisticParams(1.0, 0.0)
HOLDOUT = 0.1

MODEL_MAGIC = b'FDFM'
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct('<4sH16sIdd')


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """A trained window classifier.

    ``params`` holds numpy arrays: support_vectors, dual_coef, intercept and
    gamma for the SVM; coef and intercept for the logistic family.
    """

    family: str
    dims: int
    params: dict
    calibration: LogisticParams = UNCALIBRATED
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgument(f'unknown classifier family {self.family!r}')

    def decision_function(self, features):
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if features.shape[1] != self.dims:
            raise InvalidArgument(f'classifier expects {self.dims} features, got {features.shape[1]}')
        if self.family == SVM_RBF:
            kernel = rbf_kernel(features, self.params['support_vectors'], gamma=float(self.params['gamma']))
            return kernel @ self.params['dual_coef'] + float(self.params['intercept'])
        return features @ self.params['coef'] + float(self.params['intercept'])

    def predict_scores(self, features):
        return logistic_normalize(self.decision_function(features), self.calibration)


def predict_score(model, features):
    """Calibrated score in [0, 1] of one feature vector; higher means singly compressed."""
    return float(model.predict_scores(features)[0])


def _check_training_set(features, labels):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if features.ndim != 2 or labels.shape != (features.shape[0],):
        raise InvalidArgument(f'features {features.shape} and labels {labels.shape} do not line up')
    if not np.all(np.isfinite(features)):
        raise InvalidArgument('training features must be finite')
    if not set(np.unique(labels)) <= {0, 1}:
        raise InvalidArgument('labels must be 0 (double) or 1 (single)')
    if len(np.unique(labels)) < 2:
        raise InvalidArgument('training needs samples of both classes')
    return features, labels


def deduplicate(features, labels):
    """Drop repeated (features, label) rows, keeping first occurrences in order."""
    _, first = np.unique(np.column_stack([features, labels]), axis=0, return_index=True)
    keep = np.sort(first)
    return features[keep], labels[keep]


def _holdout_split(labels, rng, fraction=HOLDOUT):
    """Per-class seeded split; the hold-out is empty when a class is too small to spare."""
    order = rng.permutation(len(labels))
    train, held = [], []
    for label in (0, 1):
        members = order[labels[order] == label]
        size = int(len(members) * fraction)
        held.append(members[:size])
        train.append(members[size:])
    if min(len(h) for h in held) == 0:
        return np.arange(len(labels)), np.array([], dtype=np.int64)
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(held))


def _fit(family, features, labels, C):
    if family == SVM_RBF:
        gamma = 1.0 / features.shape[1]
        svm = SVC(kernel='rbf', C=C, gamma=gamma)
        svm.fit(features, labels)
        return {
            'support_vectors': svm.support_vectors_,
            'dual_coef': svm.dual_coef_[0],
            'intercept': np.float64(svm.intercept_[0]),
            'gamma': np.float64(gamma),
        }
    regression = LogisticRegression(C=C, max_iter=1000)
    regression.fit(features, labels)
    return {'coef': regression.coef_[0], 'intercept': np.float64(regression.intercept_[0])}


def calibrate(margins, labels):
    """Logistic fit of hold-out labels on classifier margins.

    A non-positive slope means the margins carry no usable signal on the
    hold-out, and the unit logistic is kept.
    """
    if len(np.unique(labels)) < 2:
        return UNCALIBRATED
    regression = LogisticRegression(C=1.0)
    regression.fit(np.asarray(margins).reshape(-1, 1), labels)
    slope, intercept = float(regression.coef_[0, 0]), float(regression.intercept_[0])
    if slope <= 0:
        logger.warning('Calibration slope %.4f is not positive; keeping the unit logistic', slope)
        return UNCALIBRATED
    return LogisticParams(slope, intercept / slope)


def train_classifier(features, labels, family=SVM_RBF, seed=0, C=1.0, metadata=None):
    """Fit a binary window classifier (1 = singly, 0 = doubly compressed).

    Repeated samples are dropped, 10% of each class is held out with ``seed``
    to fit the score calibration, and the rest trains the classifier.
    """
    if family not in FAMILIES:
        raise InvalidArgument(f'unknown classifier family {family!r}')
    features, labels = _check_training_set(features, labels)
    features, labels = deduplicate(features, labels)
    train, held = _holdout_split(labels, np.random.default_rng(seed))
    if len(np.unique(labels[train])) < 2:
        raise InvalidArgument('training needs samples of both classes')

    params = _fit(family, features[train], labels[train], C)
    model = ClassifierModel(family, features.shape[1], params)
    calibration = UNCALIBRATED
    if held.size:
        calibration = calibrate(model.decision_function(features[held]), labels[held])
    meta = {
        'n_single': int((labels == 1).sum()),
        'n_double': int((labels == 0).sum()),
        'n_holdout': int(held.size),
        'seed': seed,
        'calibrated': calibration != UNCALIBRATED,
        **(metadata or {}),
    }
    logger.info('Trained %s classifier on %d samples (%d features), calibration %s',
                family, len(train), features.shape[1], calibration)
    return ClassifierModel(family, features.shape[1], params, calibration, meta)


def dumps_model(model):
    blob = io.BytesIO()
    np.savez(blob, **{name: np.asarray(value) for name, value in sorted(model.params.items())})
    blob = blob.getvalue()
    metadata = json.dumps(model.metadata, sort_keys=True).encode('utf-8')
    family = model.family.encode('ascii')
    if len(family) > 16:
        raise InvalidArgument(f'family tag {model.family!r} is longer than 16 bytes')
    header = _MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, family, model.dims,
                                model.calibration.phi1, model.calibration.phi2)
    return b''.join([header, struct.pack('<I', len(metadata)), metadata, struct.pack('<Q', len(blob)), blob])


def loads_model(data):
    if len(data) < _MODEL_HEADER.size + 4:
        raise InvalidArgument('model file is truncated')
    magic, version, family, dims, phi1, phi2 = _MODEL_HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise InvalidArgument('not a classifier model file')
    if version != MODEL_VERSION:
        raise InvalidArgument(f'unsupported model file version {version}')
    offset = _MODEL_HEADER.size
    try:
        (meta_length,) = struct.unpack_from('<I', data, offset)
        offset += 4
        metadata = json.loads(data[offset:offset + meta_length].decode('utf-8'))
        offset += meta_length
        (blob_length,) = struct.unpack_from('<Q', data, offset)
        offset += 8
    except (struct.error, ValueError) as exc:
        raise InvalidArgument(f'corrupt model file: {exc}') from None
    blob = data[offset:offset + blob_length]
    if len(blob) != blob_length:
        raise InvalidArgument('model parameter blob is truncated')
    with np.load(io.BytesIO(blob)) as archive:
        params = {name: archive[name] for name in archive.files}
    return ClassifierModel(family.rstrip(b'\0').decode('ascii'), dims, params, LogisticParams(phi1, phi2), metadata)
