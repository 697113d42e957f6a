"""Immutable containers for pixels and quantized DCT coefficients."""
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np
from PIL import Image

from .exceptions import InvalidArgument
from .tables import QuantTable


def readonly(array):
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


def ceil_div(a, b):
    return -(-a // b)


@dataclass(frozen=True, eq=False)
class PixelImage:
    """8-bit image, either a (H, W) luminance plane or a (H, W, 3) RGB array."""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim not in (2, 3) or (samples.ndim == 3 and samples.shape[2] != 3):
            raise InvalidArgument(f'expected a (H, W) or (H, W, 3) array, got shape {samples.shape}')
        if samples.dtype != np.uint8:
            if samples.size and (not np.all(np.isfinite(samples)) or samples.min() < 0 or samples.max() > 255):
                raise InvalidArgument('pixel samples must lie in [0, 255]')
            samples = np.rint(samples).astype(np.uint8)
        object.__setattr__(self, 'samples', readonly(samples))

    @property
    def height(self):
        return self.samples.shape[0]

    @property
    def width(self):
        return self.samples.shape[1]

    @property
    def channels(self):
        return 1 if self.samples.ndim == 2 else 3

    def luminance(self):
        """Luminance plane as float64 (JFIF weights for RGB input)."""
        if self.channels == 1:
            return self.samples.astype(np.float64)
        rgb = self.samples.astype(np.float64)
        return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]

    def __eq__(self, other):
        if not isinstance(other, PixelImage):
            return NotImplemented
        return np.array_equal(self.samples, other.samples)

    __hash__ = None

    @classmethod
    def open(cls, path, mode=None):
        with Image.open(path) as image:
            if mode is None:
                mode = 'L' if image.mode in ('1', 'L', 'I;16', 'I', 'F') else 'RGB'
            return cls(np.asarray(image.convert(mode)))

    def to_pil(self):
        return Image.fromarray(np.ascontiguousarray(self.samples))


@dataclass(frozen=True, eq=False)
class Component:
    """One colour component: sampling factors, table id and its block grid.

    ``coefficients`` has shape (block rows, block cols, 64); the last axis is
    in natural (row-major) order and holds the quantized integers as stored
    in the bitstream.
    """

    component_id: int
    h: int
    v: int
    table_id: int
    coefficients: np.ndarray

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients)
        if coefficients.ndim != 3 or coefficients.shape[2] != 64:
            raise InvalidArgument(f'coefficient grid must have shape (rows, cols, 64), got {coefficients.shape}')
        if not 1 <= self.h <= 4 or not 1 <= self.v <= 4:
            raise InvalidArgument('sampling factors must lie in [1, 4]')
        object.__setattr__(self, 'coefficients', readonly(coefficients.astype(np.int32)))

    @property
    def grid_shape(self):
        return self.coefficients.shape[:2]


@dataclass(frozen=True, eq=False)
class QuantizedJpeg:
    width: int
    height: int
    components: tuple
    tables: MappingProxyType

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidArgument('image dimensions must be positive')
        components = tuple(self.components)
        if not components:
            raise InvalidArgument('a JPEG image needs at least one component')
        tables = MappingProxyType(dict(self.tables))
        for index, component in enumerate(components):
            if component.table_id not in tables:
                raise InvalidArgument(f'component {component.component_id} refers to missing table {component.table_id}')
            if not isinstance(tables[component.table_id], QuantTable):
                raise InvalidArgument('tables must map table ids to QuantTable')
            expected = self.expected_grid(index, components)
            if component.grid_shape != expected:
                raise InvalidArgument(
                    f'component {component.component_id} grid {component.grid_shape} != expected {expected}'
                )
        object.__setattr__(self, 'components', components)
        object.__setattr__(self, 'tables', tables)

    def component_size(self, index, components=None):
        """Sample dimensions (height, width) of component ``index`` after subsampling."""
        components = components or self.components
        hmax = max(c.h for c in components)
        vmax = max(c.v for c in components)
        component = components[index]
        return ceil_div(self.height * component.v, vmax), ceil_div(self.width * component.h, hmax)

    def expected_grid(self, index, components=None):
        rows, cols = self.component_size(index, components)
        return ceil_div(rows, 8), ceil_div(cols, 8)

    @property
    def luminance(self):
        return self.components[0].coefficients

    @property
    def luminance_table(self):
        return self.tables[self.components[0].table_id]

    @property
    def block_grid(self):
        return self.components[0].grid_shape

    @property
    def subsampling(self):
        return tuple((c.h, c.v) for c in self.components)

    def __eq__(self, other):
        if not isinstance(other, QuantizedJpeg):
            return NotImplemented
        return (
            (self.width, self.height, self.subsampling) == (other.width, other.height, other.subsampling)
            and all(self.tables[a.table_id] == other.tables[b.table_id]
                    for a, b in zip(self.components, other.components))
            and all(np.array_equal(a.coefficients, b.coefficients)
                    for a, b in zip(self.components, other.components))
        )

    __hash__ = None
