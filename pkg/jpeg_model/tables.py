"""Quantization tables, the quality scale and the zig-zag scan order."""
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .exceptions import InvalidArgument

# Natural (row-major) index of the coefficient at each zig-zag position.
ZIGZAG = np.array([
    0, 1, 8, 16, 9, 2, 3, 10,
    17, 24, 32, 25, 18, 11, 4, 5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13, 6, 7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
], dtype=np.intp)

# Canonical base tables of the reference quality scale, natural order.
BASE_LUMINANCE = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
], dtype=np.int64)

BASE_CHROMINANCE = np.array([
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
], dtype=np.int64)


def zigzag_ac_indices(n_freqs):
    """Natural indices of the first ``n_freqs`` AC coefficients in zig-zag order."""
    if not 1 <= n_freqs <= 63:
        raise InvalidArgument(f'number of AC frequencies must be in [1, 63], got {n_freqs}')
    return ZIGZAG[1:n_freqs + 1].copy()


@dataclass(frozen=True)
class QuantTable:
    """64 quantization steps, stored in zig-zag order as in a DQT segment."""

    zigzag: tuple

    def __post_init__(self):
        values = tuple(int(v) for v in self.zigzag)
        if len(values) != 64:
            raise InvalidArgument(f'quantization table needs 64 entries, got {len(values)}')
        if min(values) < 1 or max(values) > 255:
            raise InvalidArgument('quantization steps must lie in [1, 255]')
        object.__setattr__(self, 'zigzag', values)

    @classmethod
    def from_natural(cls, values):
        natural = np.asarray(values, dtype=np.int64).reshape(64)
        return cls(tuple(natural[ZIGZAG].tolist()))

    @cached_property
    def natural(self):
        table = np.empty(64, dtype=np.int64)
        table[ZIGZAG] = self.zigzag
        table.setflags(write=False)
        return table

    def step(self, zigzag_position):
        return self.zigzag[zigzag_position]


def _validate_quality(q):
    if isinstance(q, bool) or int(q) != q or not 1 <= q <= 100:
        raise InvalidArgument(f'quality factor must be an integer in [1, 100], got {q!r}')
    return int(q)


def _scale(base, q):
    scale = 5000 // q if q < 50 else 200 - 2 * q
    return np.clip((base * scale + 50) // 100, 1, 255)


@lru_cache(maxsize=None, typed=True)
def quality_to_tables(q):
    """Luminance and chrominance tables for quality ``q`` on the reference scale."""
    q = _validate_quality(q)
    return (
        QuantTable.from_natural(_scale(BASE_LUMINANCE, q)),
        QuantTable.from_natural(_scale(BASE_CHROMINANCE, q)),
    )


def estimate_quality(table, chroma=False):
    """Quality whose scaled table is closest (L1) to ``table``; ties go to the higher quality."""
    target = np.asarray(table.natural)
    best_q, best_distance = 100, None
    for q in range(100, 0, -1):
        reference = quality_to_tables(q)[1 if chroma else 0].natural
        distance = int(np.abs(reference - target).sum())
        if best_distance is None or distance < best_distance:
            best_q, best_distance = q, distance
            if distance == 0:
                break
    return best_q
