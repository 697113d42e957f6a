"""Confusion counts, ROC samples and per-image evaluation records."""
from dataclasses import dataclass, field

from jpeg_model.exceptions import InvalidArgument

AUC_CAPS = (0.05, 0.1, 0.2)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise InvalidArgument(f'confusion counts must be non-negative: {self}')

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def tp_rate(self):
        """1 when the mask has no positives (negative controls)."""
        positives = self.tp + self.fn
        return self.tp / positives if positives else 1.0

    @property
    def fp_rate(self):
        negatives = self.fp + self.tn
        return self.fp / negatives if negatives else 0.0

    @property
    def f1(self):
        denominator = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denominator if denominator else 0.0

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)


@dataclass(frozen=True)
class RocSample:
    threshold: float
    fp_rate: float
    tp_rate: float
    f1: float

    def __post_init__(self):
        if not (0 <= self.fp_rate <= 1 and 0 <= self.tp_rate <= 1):
            raise InvalidArgument(f'rates must lie in [0, 1]: {self}')


@dataclass(frozen=True)
class EvalRecord:
    """Metrics of one detector on one case.

    ``auc`` maps each false-positive cap to the normalized partial AUC.
    Negative controls carry their samples but are left out of aggregates.
    """

    case_id: str
    detector: str
    q1: int
    q2: int
    samples: tuple
    max_f1: float
    auc: dict = field(default_factory=dict)
    negative_control: bool = False
    config_hash: str = None

    def __post_init__(self):
        object.__setattr__(self, 'samples', tuple(self.samples))
        for cap, value in self.auc.items():
            if not 0 <= value <= 1:
                raise InvalidArgument(f'AUC at {cap} must lie in [0, 1], got {value}')
