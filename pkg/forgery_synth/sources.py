"""Source bitmaps for corpus synthesis: user-supplied triples or generated textures."""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from jpeg_model.exceptions import InvalidArgument
from jpeg_model.structures import PixelImage

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = ('.png', '.bmp', '.ppm', '.pgm', '.tif', '.tiff')


@dataclass(frozen=True)
class SourceTriple:
    """Paths of an original bitmap, its modified version and the modification mask."""

    source_id: str
    original: Path
    tampered: Path
    mask: Path

    def load(self):
        original = PixelImage.open(self.original)
        tampered = PixelImage.open(self.tampered, mode='L' if original.channels == 1 else 'RGB')
        with Image.open(self.mask) as image:
            mask = np.asarray(image.convert('L')) >= 128
        return original, tampered, mask


def discover_sources(directory):
    """Find ``<id>_original.*`` / ``<id>_tampered.*`` / ``<id>_mask.*`` triples, sorted by id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InvalidArgument(f'source directory {directory} does not exist')
    triples = []
    for original in sorted(directory.iterdir()):
        if original.suffix.lower() not in IMAGE_SUFFIXES or not original.stem.endswith('_original'):
            continue
        source_id = original.stem[:-len('_original')]
        tampered = _sibling(directory, f'{source_id}_tampered')
        mask = _sibling(directory, f'{source_id}_mask')
        if tampered is None or mask is None:
            logger.warning('Source %s is missing its tampered bitmap or mask, skipped', source_id)
            continue
        triples.append(SourceTriple(source_id, original, tampered, mask))
    return triples


def _sibling(directory, stem):
    for suffix in IMAGE_SUFFIXES:
        candidate = directory / f'{stem}{suffix}'
        if candidate.exists():
            return candidate
    return None


def textured_image(seed, height, width, rgb=False):
    """Deterministic multi-scale texture with natural-image-like DCT statistics.

    Band-limited noise at several scales, modulated by a smooth envelope so
    that coefficient magnitudes are heavy tailed. Values stay inside [30, 220].
    """
    rng = np.random.default_rng(seed)
    field = np.zeros((height, width))
    for sigma, weight in ((0.8, 0.3), (2.0, 0.6), (5.0, 1.0), (14.0, 1.4)):
        layer = gaussian_filter(rng.standard_normal((height, width)), sigma, mode='reflect')
        field += weight * layer / layer.std()
    envelope = gaussian_filter(rng.standard_normal((height, width)), 20.0, mode='reflect')
    field *= np.exp(0.6 * envelope / envelope.std())
    luminance = 128.0 + 30.0 * field / field.std()
    if not rgb:
        return PixelImage(np.clip(luminance, 30, 220))
    tint = [gaussian_filter(rng.standard_normal((height, width)), 8.0, mode='reflect') for _ in range(3)]
    channels = [luminance + 12.0 * t / t.std() for t in tint]
    return PixelImage(np.clip(np.stack(channels, axis=-1), 30, 220))


def synthetic_source(seed, height=256, width=256, rgb=False, coverage=0.25):
    """Original texture, an unrelated tampered texture and a rectangular pixel mask."""
    entropy = [int(v) for v in np.atleast_1d(seed)]
    rng = np.random.default_rng(entropy + [1])
    original = textured_image(entropy + [2], height, width, rgb)
    tampered = textured_image(entropy + [3], height, width, rgb)
    side = np.sqrt(coverage)
    mask_height = max(8, int(round(height * side)))
    mask_width = max(8, int(round(width * side)))
    top = int(rng.integers(0, height - mask_height + 1))
    left = int(rng.integers(0, width - mask_width + 1))
    mask = np.zeros((height, width), dtype=bool)
    mask[top:top + mask_height, left:left + mask_width] = True
    return original, tampered, mask


def write_synthetic_sources(directory, count, seed, height=256, width=256, rgb=False):
    """Materialize ``count`` synthetic triples as PNG files and return them."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    triples = []
    for index in range(count):
        source_id = f'synthetic{index:03d}'
        paths = [directory / f'{source_id}_{name}.png' for name in ('original', 'tampered', 'mask')]
        if not all(path.exists() for path in paths):
            original, tampered, mask = synthetic_source([seed, index], height, width, rgb)
            original.to_pil().save(paths[0])
            tampered.to_pil().save(paths[1])
            Image.fromarray(mask.astype(np.uint8) * 255).save(paths[2])
        triples.append(SourceTriple(source_id, *paths))
    return triples
