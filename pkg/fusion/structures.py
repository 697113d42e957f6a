"""Fusion parameters and results."""
import math
from dataclasses import dataclass, field

import numpy as np

from jpeg_model.exceptions import InvalidArgument
from jpeg_model.structures import readonly


@dataclass(frozen=True)
class FusionParams:
    """Knobs of the random-field fusion.

    ``alpha`` biases the decision (label-energy units), ``beta`` scales the
    Potts smoothing, ``delta`` drifts the threshold where candidates are
    confident and ``rho`` rejects candidates with lower reliability. ``tau``
    is the base decision threshold.
    """

    alpha: float = 0.0
    beta: float = 0.0
    delta: float = 0.0
    rho: float = 0.0
    tau: float = 0.5

    def __post_init__(self):
        for name in ('alpha', 'beta', 'delta', 'rho', 'tau'):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidArgument(f'fusion parameter {name} must be finite, got {value}')
            object.__setattr__(self, name, value)
        if self.beta < 0:
            raise InvalidArgument(f'interaction strength beta must be >= 0, got {self.beta}')
        if not 0 <= self.rho <= 1:
            raise InvalidArgument(f'rejection threshold rho must lie in [0, 1], got {self.rho}')
        if not 0 <= self.tau <= 1:
            raise InvalidArgument(f'base threshold tau must lie in [0, 1], got {self.tau}')

    def with_tau(self, tau):
        return FusionParams(self.alpha, self.beta, self.delta, self.rho, tau)

    def as_dict(self):
        return {'alpha': self.alpha, 'beta': self.beta, 'delta': self.delta, 'rho': self.rho}


@dataclass(frozen=True, eq=False)
class FusionResult:
    """Binary decision map plus the state the EM loop ended in.

    ``weights`` line up with ``retained`` (indices into the candidate list
    given to the fusion); ``energy_trace`` has the labelling energy before
    the first sweep and after every ICM sweep.
    """

    labels: np.ndarray
    weights: np.ndarray
    iterations: int
    converged: bool
    retained: tuple = ()
    fallback: bool = False
    energy_trace: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, 'labels', readonly(np.asarray(self.labels, dtype=bool)))
        object.__setattr__(self, 'weights', readonly(np.asarray(self.weights, dtype=np.float64)))
        object.__setattr__(self, 'retained', tuple(self.retained))
        object.__setattr__(self, 'energy_trace', tuple(float(e) for e in self.energy_trace))

    @property
    def shape(self):
        return self.labels.shape

    def __eq__(self, other):
        if not isinstance(other, FusionResult):
            return NotImplemented
        return (
            np.array_equal(self.labels, other.labels)
            and np.array_equal(self.weights, other.weights)
            and (self.iterations, self.converged, self.retained, self.fallback, self.energy_trace)
            == (other.iterations, other.converged, other.retained, other.fallback, other.energy_trace)
        )

    __hash__ = None
