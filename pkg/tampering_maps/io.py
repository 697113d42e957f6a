"""On-disk formats: ``.tmap`` score grids, PBM block masks and PNG previews."""
import re
import struct

import numpy as np
from PIL import Image

from jpeg_model.exceptions import InvalidArgument

from .structures import GroundTruthMask, TamperingMap

TMAP_MAGIC = b'TMP2'
# magic, width, height, config hash, reserved; the float64 reliability follows the header
TMAP_HEADER = struct.Struct('<4sHHI4x')
TMAP_RELIABILITY = struct.Struct('<d')

_PBM_HEADER = re.compile(rb'P4\s*((?:#[^\n]*\n\s*)*)(\d+)\s+(\d+)\s')


def _hash_to_int(config_hash):
    if config_hash is None:
        return 0
    try:
        value = int(config_hash, 16)
    except (TypeError, ValueError):
        raise InvalidArgument(f'config hash must be hexadecimal, got {config_hash!r}') from None
    if not 0 <= value < 1 << 32:
        raise InvalidArgument(f'config hash {config_hash!r} does not fit in 32 bits')
    return value


def dumps_tmap(m, config_hash=None):
    rows, cols = m.shape
    if rows >= 1 << 16 or cols >= 1 << 16:
        raise InvalidArgument('map too large for the 16-bit header fields')
    reliability = np.nan if m.reliability is None else m.reliability
    header = TMAP_HEADER.pack(TMAP_MAGIC, cols, rows, _hash_to_int(config_hash))
    return header + TMAP_RELIABILITY.pack(reliability) + m.scores.astype('<f4').tobytes()


def loads_tmap(data, detector=''):
    """Parse a ``.tmap`` payload; returns (TamperingMap, config hash as 8 hex digits)."""
    offset = TMAP_HEADER.size + TMAP_RELIABILITY.size
    if len(data) < offset:
        raise InvalidArgument('tampering map file is shorter than its header')
    magic, cols, rows, config = TMAP_HEADER.unpack_from(data)
    if magic != TMAP_MAGIC:
        raise InvalidArgument(f'bad tampering map magic {magic!r}')
    (reliability,) = TMAP_RELIABILITY.unpack_from(data, TMAP_HEADER.size)
    payload = data[offset:]
    if len(payload) != rows * cols * 4:
        raise InvalidArgument(f'tampering map payload has {len(payload)} bytes, expected {rows * cols * 4}')
    scores = np.frombuffer(payload, dtype='<f4').reshape(rows, cols).astype(np.float64)
    reliability = None if np.isnan(reliability) else float(reliability)
    return TamperingMap(scores, detector, reliability), f'{config:08x}'


def read_tmap(path, detector=''):
    with open(path, 'rb') as handle:
        return loads_tmap(handle.read(), detector)


def dumps_pbm(mask, config_hash=None):
    """Binary PBM (P4); 1 bits are tampered blocks."""
    rows, cols = mask.shape
    header = b'P4\n'
    if config_hash is not None:
        header += f'# config {config_hash}\n'.encode('ascii')
    header += f'{cols} {rows}\n'.encode('ascii')
    return header + np.packbits(mask.cells, axis=1).tobytes()


def loads_pbm(data):
    """Parse a P4 mask; returns (GroundTruthMask, config hash or None)."""
    match = _PBM_HEADER.match(data)
    if match is None:
        raise InvalidArgument('not a binary PBM (P4) file')
    comments, cols, rows = match.group(1), int(match.group(2)), int(match.group(3))
    config_hash = None
    found = re.search(rb'#\s*config\s+([0-9a-fA-F]+)', comments)
    if found:
        config_hash = found.group(1).decode('ascii')
    row_bytes = (cols + 7) // 8
    payload = data[match.end():match.end() + rows * row_bytes]
    if len(payload) != rows * row_bytes:
        raise InvalidArgument('truncated PBM raster')
    packed = np.frombuffer(payload, dtype=np.uint8).reshape(rows, row_bytes)
    cells = np.unpackbits(packed, axis=1)[:, :cols].astype(bool)
    return GroundTruthMask(cells), config_hash


def read_pbm(path):
    with open(path, 'rb') as handle:
        return loads_pbm(handle.read())


def preview_image(m, scale=8):
    """8-bit grayscale rendering of a map, each block drawn as ``scale`` x ``scale`` pixels."""
    pixels = np.rint(m.scores * 255).astype(np.uint8)
    if scale > 1:
        pixels = np.kron(pixels, np.ones((scale, scale), dtype=np.uint8))
    return Image.fromarray(pixels)
