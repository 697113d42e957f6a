"""Block-resolution value types shared by detectors, fusion and evaluation."""
from dataclasses import dataclass

import numpy as np

from jpeg_model.exceptions import InvalidArgument
from jpeg_model.structures import readonly

BLOCK = 8


@dataclass(frozen=True)
class LogisticParams:
    phi1: float
    phi2: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.phi1) or self.phi1 <= 0:
            raise InvalidArgument(f'logistic slope must be positive, got {self.phi1}')
        if not np.isfinite(self.phi2):
            raise InvalidArgument('logistic offset must be finite')


@dataclass(frozen=True)
class WindowRect:
    """Analysis window in pixels; ``top`` and ``left`` lie on the 8 px block grid."""

    top: int
    left: int
    height: int
    width: int

    def blocks(self):
        """Block-grid slices covered by the window."""
        return (
            slice(self.top // BLOCK, (self.top + self.height) // BLOCK),
            slice(self.left // BLOCK, (self.left + self.width) // BLOCK),
        )


@dataclass(frozen=True, eq=False)
class TamperingMap:
    """One score in [0, 1] per 8x8 block; higher means more likely tampered.

    ``reliability`` is None when the producing detector does not estimate it.
    """

    scores: np.ndarray
    detector: str = ''
    reliability: float = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 2 or 0 in scores.shape:
            raise InvalidArgument(f'a tampering map is a non-empty 2-D grid, got shape {scores.shape}')
        if not np.all(np.isfinite(scores)) or scores.min() < 0 or scores.max() > 1:
            raise InvalidArgument('tampering map scores must be finite and within [0, 1]')
        if self.reliability is not None:
            reliability = float(self.reliability)
            if not 0 <= reliability <= 1:
                raise InvalidArgument(f'reliability must lie in [0, 1], got {reliability}')
            object.__setattr__(self, 'reliability', reliability)
        object.__setattr__(self, 'scores', readonly(scores))

    @property
    def shape(self):
        return self.scores.shape

    def with_reliability(self, reliability):
        return TamperingMap(self.scores, self.detector, reliability)

    def __eq__(self, other):
        if not isinstance(other, TamperingMap):
            return NotImplemented
        return (
            self.detector == other.detector
            and self.reliability == other.reliability
            and np.array_equal(self.scores, other.scores)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class GroundTruthMask:
    """Binary block grid, True = tampered."""

    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2 or 0 in cells.shape:
            raise InvalidArgument(f'a ground-truth mask is a non-empty 2-D grid, got shape {cells.shape}')
        object.__setattr__(self, 'cells', readonly(cells.astype(bool)))

    @property
    def shape(self):
        return self.cells.shape

    @property
    def is_negative_control(self):
        return not self.cells.any()

    def __eq__(self, other):
        if not isinstance(other, GroundTruthMask):
            return NotImplemented
        return np.array_equal(self.cells, other.cells)

    __hash__ = None
