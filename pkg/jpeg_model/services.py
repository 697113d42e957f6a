"""Baseline JPEG codec: bitstream <-> quantized DCT coefficients <-> pixels."""
import logging
import struct

import numpy as np
from scipy.fft import dctn, idctn

from .exceptions import InvalidArgument, JpegParseError, UnsupportedFormat
from .huffman import (
    STD_AC_CHROMINANCE,
    STD_AC_LUMINANCE,
    STD_DC_CHROMINANCE,
    STD_DC_LUMINANCE,
    BitReader,
    BitWriter,
    HuffmanTable,
    category,
)
from .structures import Component, PixelImage, QuantizedJpeg, ceil_div
from .tables import ZIGZAG, QuantTable, quality_to_tables

logger = logging.getLogger(__name__)

SOI, EOI, SOS, DQT, DHT, DRI, COM = 0xD8, 0xD9, 0xDA, 0xDB, 0xC4, 0xDD, 0xFE
SOF_BASELINE = (0xC0, 0xC1)
SOF_UNSUPPORTED = {
    0xC2: 'progressive DCT',
    0xC3: 'lossless',
    0xC5: 'differential sequential',
    0xC6: 'differential progressive',
    0xC7: 'differential lossless',
    0xC9: 'arithmetic sequential',
    0xCA: 'arithmetic progressive',
    0xCB: 'arithmetic lossless',
    0xCC: 'arithmetic conditioning (DAC)',
    0xCD: 'arithmetic differential sequential',
    0xCE: 'arithmetic differential progressive',
    0xCF: 'arithmetic differential lossless',
}

SUBSAMPLING = {
    '4:4:4': ((1, 1), (1, 1), (1, 1)),
    '4:2:0': ((2, 2), (1, 1), (1, 1)),
}

MAX_DC_CATEGORY = 11
MAX_AC_CATEGORY = 10


# --- pixel <-> coefficient transforms ---

def _blocks(plane):
    rows, cols = plane.shape[0] // 8, plane.shape[1] // 8
    return plane.reshape(rows, 8, cols, 8).transpose(0, 2, 1, 3)


def _pad_to(plane, height, width):
    pad_rows, pad_cols = height - plane.shape[0], width - plane.shape[1]
    if pad_rows or pad_cols:
        plane = np.pad(plane, ((0, pad_rows), (0, pad_cols)), mode='edge')
    return plane


def quantize_plane(plane, table):
    """Blockwise forward DCT and quantization of a pixel plane anchored at (0, 0).

    Planes whose sides are not multiples of 8 are edge-padded. Returns a
    (rows, cols, 64) int32 grid in natural order.
    """
    if not isinstance(table, QuantTable):
        raise InvalidArgument('quantize_plane needs a QuantTable')
    plane = np.asarray(plane, dtype=np.float64)
    plane = _pad_to(plane, ceil_div(plane.shape[0], 8) * 8, ceil_div(plane.shape[1], 8) * 8)
    coefficients = dctn(_blocks(plane) - 128.0, type=2, norm='ortho', axes=(2, 3))
    steps = table.natural.reshape(8, 8)
    # Round half away from zero, as integer JPEG encoders do.
    ratio = coefficients / steps
    quantized = np.sign(ratio) * np.floor(np.abs(ratio) + 0.5)
    return quantized.reshape(quantized.shape[0], quantized.shape[1], 64).astype(np.int32)


def dequantize_grid(coefficients, table):
    """Dequantize and inverse-transform a coefficient grid into an unclipped float plane."""
    rows, cols = coefficients.shape[:2]
    blocks = coefficients.reshape(rows, cols, 8, 8) * table.natural.reshape(8, 8)
    pixels = idctn(blocks.astype(np.float64), type=2, norm='ortho', axes=(2, 3)) + 128.0
    return pixels.transpose(0, 2, 1, 3).reshape(rows * 8, cols * 8)


def decode_component(j, index=0):
    """Sample plane of one component (float, cropped, not clipped, not upsampled)."""
    component = j.components[index]
    plane = dequantize_grid(component.coefficients, j.tables[component.table_id])
    rows, cols = j.component_size(index)
    return plane[:rows, :cols]


def decode_luminance(j):
    """Luminance plane as the decoder would store it: rounded and clipped to 8 bits."""
    return np.clip(np.rint(decode_component(j, 0)), 0, 255)


def _rgb_to_ycbcr(rgb):
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    return y, cb, cr


def _ycbcr_to_rgb(y, cb, cr):
    cb = cb - 128.0
    cr = cr - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return np.stack([r, g, b], axis=-1)


def decode_to_pixels(j):
    """Dequantize, inverse DCT, level-shift, upsample chroma and convert to RGB."""
    hmax = max(c.h for c in j.components)
    vmax = max(c.v for c in j.components)
    planes = []
    for index, component in enumerate(j.components):
        plane = np.clip(np.rint(decode_component(j, index)), 0, 255)
        plane = np.repeat(np.repeat(plane, vmax // component.v, axis=0), hmax // component.h, axis=1)
        planes.append(_pad_to(plane, j.height, j.width)[:j.height, :j.width])
    if len(planes) == 1:
        return PixelImage(planes[0].astype(np.uint8))
    if len(planes) != 3:
        raise UnsupportedFormat(f'{len(planes)}-component images cannot be converted to RGB')
    rgb = _ycbcr_to_rgb(*planes)
    return PixelImage(np.clip(np.rint(rgb), 0, 255).astype(np.uint8))


def encode(p, q, subsampling='4:4:4'):
    """Baseline JPEG at quality ``q`` with the block grid anchored at (0, 0)."""
    if p.width == 0 or p.height == 0:
        raise InvalidArgument('cannot encode a zero-sized image')
    luminance_table, chrominance_table = quality_to_tables(q)
    if p.channels == 1:
        planes = [p.samples.astype(np.float64)]
        sampling = ((1, 1),)
        tables = {0: luminance_table}
    else:
        if subsampling not in SUBSAMPLING:
            raise InvalidArgument(f'unknown chroma subsampling {subsampling!r}')
        planes = list(_rgb_to_ycbcr(p.samples.astype(np.float64)))
        sampling = SUBSAMPLING[subsampling]
        tables = {0: luminance_table, 1: chrominance_table}

    hmax = max(h for h, _ in sampling)
    vmax = max(v for _, v in sampling)
    mcu_height, mcu_width = 8 * vmax, 8 * hmax
    padded_height = ceil_div(p.height, mcu_height) * mcu_height
    padded_width = ceil_div(p.width, mcu_width) * mcu_width

    components = []
    for index, (plane, (h, v)) in enumerate(zip(planes, sampling)):
        plane = _pad_to(plane, padded_height, padded_width)
        fy, fx = vmax // v, hmax // h
        if fy > 1 or fx > 1:
            plane = plane.reshape(plane.shape[0] // fy, fy, plane.shape[1] // fx, fx).mean(axis=(1, 3))
        table_id = 0 if index == 0 else 1
        components.append((index + 1, h, v, table_id, quantize_plane(plane, tables[table_id])))

    shell = QuantizedJpeg.__new__(QuantizedJpeg)
    object.__setattr__(shell, 'width', p.width)
    object.__setattr__(shell, 'height', p.height)
    sized = [Component(cid, h, v, tid, np.zeros((1, 1, 64), dtype=np.int32)) for cid, h, v, tid, _ in components]
    cropped = []
    for index, (cid, h, v, tid, grid) in enumerate(components):
        rows, cols = shell.expected_grid(index, sized)
        cropped.append(Component(cid, h, v, tid, grid[:rows, :cols]))
    return emit(QuantizedJpeg(p.width, p.height, tuple(cropped), tables))


# --- bitstream emission ---

def _segment(marker, payload=b''):
    return struct.pack('>BBH', 0xFF, marker, len(payload) + 2) + payload


def _jfif_header():
    return _segment(0xE0, b'JFIF\x00' + struct.pack('>BBBHHBB', 1, 1, 0, 1, 1, 0, 0))


def _encode_block(writer, zz, predictor, dc_table, ac_table):
    diff = zz[0] - predictor
    size = category(diff)
    if size > MAX_DC_CATEGORY:
        raise InvalidArgument(f'DC difference {diff} exceeds the baseline range')
    writer.write(dc_table.codes[size])
    writer.write_value(diff, size)

    last = 63
    while last > 0 and zz[last] == 0:
        last -= 1
    run = 0
    ac_codes = ac_table.codes
    for k in range(1, last + 1):
        value = zz[k]
        if value == 0:
            run += 1
            continue
        while run > 15:
            writer.write(ac_codes[0xF0])
            run -= 16
        size = category(value)
        if size > MAX_AC_CATEGORY:
            raise InvalidArgument(f'AC coefficient {value} exceeds the baseline range')
        writer.write(ac_codes[run << 4 | size])
        writer.write_value(value, size)
        run = 0
    if last < 63:
        writer.write(ac_codes[0x00])
    return zz[0]


def emit(j):
    """Serialize a QuantizedJpeg as a baseline JFIF bitstream with the typical Huffman tables."""
    out = bytearray(b'\xff\xd8')
    out += _jfif_header()
    for table_id, table in sorted(j.tables.items()):
        out += _segment(DQT, bytes([table_id]) + bytes(table.zigzag))

    frame = struct.pack('>BHHB', 8, j.height, j.width, len(j.components))
    for component in j.components:
        frame += bytes([component.component_id, component.h << 4 | component.v, component.table_id])
    out += _segment(SOF_BASELINE[0], frame)

    huffman = [(STD_DC_LUMINANCE, STD_AC_LUMINANCE)]
    if len(j.components) > 1:
        huffman.append((STD_DC_CHROMINANCE, STD_AC_CHROMINANCE))
    dht = b''
    for destination, (dc_table, ac_table) in enumerate(huffman):
        dht += dc_table.payload(0, destination) + ac_table.payload(1, destination)
    out += _segment(DHT, dht)

    scan = bytes([len(j.components)])
    for index, component in enumerate(j.components):
        destination = 0 if index == 0 else 1
        scan += bytes([component.component_id, destination << 4 | destination])
    out += _segment(SOS, scan + bytes([0, 63, 0]))
    out += _entropy_code(j, huffman)
    out += b'\xff\xd9'
    return bytes(out)


def _entropy_code(j, huffman):
    writer = BitWriter()
    tables = [huffman[0 if index == 0 else 1] for index in range(len(j.components))]
    if len(j.components) == 1:
        zz_grid = j.components[0].coefficients[..., ZIGZAG].tolist()
        dc_table, ac_table = tables[0]
        predictor = 0
        for row in zz_grid:
            for block in row:
                predictor = _encode_block(writer, block, predictor, dc_table, ac_table)
        return writer.getvalue()

    hmax = max(c.h for c in j.components)
    vmax = max(c.v for c in j.components)
    mcu_rows = ceil_div(j.height, 8 * vmax)
    mcu_cols = ceil_div(j.width, 8 * hmax)
    grids = []
    for component in j.components:
        grid = component.coefficients
        pad_rows = mcu_rows * component.v - grid.shape[0]
        pad_cols = mcu_cols * component.h - grid.shape[1]
        grid = np.pad(grid, ((0, pad_rows), (0, pad_cols), (0, 0)), mode='edge')
        grids.append(grid[..., ZIGZAG].tolist())
    predictors = [0] * len(j.components)
    for mcu_row in range(mcu_rows):
        for mcu_col in range(mcu_cols):
            for index, component in enumerate(j.components):
                dc_table, ac_table = tables[index]
                for by in range(component.v):
                    for bx in range(component.h):
                        block = grids[index][mcu_row * component.v + by][mcu_col * component.h + bx]
                        predictors[index] = _encode_block(writer, block, predictors[index], dc_table, ac_table)
    return writer.getvalue()


def with_comment(data, text):
    """Insert a COM segment right after SOI."""
    if not data.startswith(b'\xff\xd8'):
        raise InvalidArgument('not a JPEG bitstream')
    return data[:2] + _segment(COM, text.encode('utf-8')) + data[2:]


def read_comments(data):
    comments = []
    pos = 2
    while pos + 4 <= len(data) and data[pos] == 0xFF:
        marker = data[pos + 1]
        if marker == SOS:
            break
        length = struct.unpack('>H', data[pos + 2:pos + 4])[0]
        if marker == COM:
            comments.append(data[pos + 4:pos + 2 + length].decode('utf-8', errors='replace'))
        pos += 2 + length
    return comments


# --- bitstream parsing ---

def _entropy_segments(data, start):
    """Unstuffed entropy-coded data, split at restart markers; returns (segments, end)."""
    segments = []
    out = bytearray()
    pos = start
    while True:
        nxt = data.find(b'\xff', pos)
        if nxt < 0 or nxt + 1 >= len(data):
            raise JpegParseError(len(data), 'truncated entropy-coded segment')
        out += data[pos:nxt]
        marker = data[nxt + 1]
        if marker == 0x00:
            out.append(0xFF)
            pos = nxt + 2
        elif marker == 0xFF:
            pos = nxt + 1
        elif 0xD0 <= marker <= 0xD7:
            segments.append(bytes(out))
            out = bytearray()
            pos = nxt + 2
        else:
            segments.append(bytes(out))
            return segments, nxt


def _decode_block(reader, dc_table, ac_table, predictor, out):
    size = reader.decode(dc_table)
    predictor += reader.receive(size)
    out[0] = predictor
    k = 1
    while k < 64:
        symbol = reader.decode(ac_table)
        run, size = symbol >> 4, symbol & 0x0F
        if size == 0:
            if run == 15:
                k += 16
                continue
            break
        k += run
        if k > 63:
            raise JpegParseError(reader.offset, 'AC run past the end of the block')
        out[k] = reader.receive(size)
        k += 1
    return predictor


class _Frame:
    def __init__(self, offset, payload):
        precision, self.height, self.width, count = struct.unpack('>BHHB', payload[:6])
        if precision != 8:
            raise UnsupportedFormat(f'{precision}-bit sample precision')
        if self.height == 0:
            raise UnsupportedFormat('image height defined by a DNL marker')
        if self.width == 0:
            raise JpegParseError(offset, 'zero image width')
        if len(payload) < 6 + 3 * count:
            raise JpegParseError(offset, 'truncated frame header')
        self.components = []
        for i in range(count):
            cid, sampling, table_id = payload[6 + 3 * i:9 + 3 * i]
            self.components.append((cid, sampling >> 4, sampling & 0x0F, table_id))
        self.hmax = max(c[1] for c in self.components)
        self.vmax = max(c[2] for c in self.components)
        self.mcu_rows = ceil_div(self.height, 8 * self.vmax)
        self.mcu_cols = ceil_div(self.width, 8 * self.hmax)
        # Zig-zag ordered, padded to whole MCUs.
        self.grids = {
            cid: np.zeros((self.mcu_rows * v, self.mcu_cols * h, 64), dtype=np.int32)
            for cid, h, v, _ in self.components
        }
        self.scanned = set()

    def component(self, cid):
        for entry in self.components:
            if entry[0] == cid:
                return entry
        raise JpegParseError(0, f'scan refers to unknown component {cid}')


def _decode_scan(frame, scan_components, huffman, restart_interval, segments, offset):
    block = [0] * 64
    if len(scan_components) == 1:
        cid, dc_id, ac_id = scan_components[0]
        _, h, v, _ = frame.component(cid)
        rows = ceil_div(ceil_div(frame.height * v, frame.vmax), 8)
        cols = ceil_div(ceil_div(frame.width * h, frame.hmax), 8)
        units = [[(cid, r, c)] for r in range(rows) for c in range(cols)]
    else:
        layout = []
        for cid, _, _ in scan_components:
            _, h, v, _ = frame.component(cid)
            layout.append((cid, h, v))
        units = []
        for mr in range(frame.mcu_rows):
            for mc in range(frame.mcu_cols):
                units.append([
                    (cid, mr * v + by, mc * h + bx)
                    for cid, h, v in layout for by in range(v) for bx in range(h)
                ])

    tables = {}
    for cid, dc_id, ac_id in scan_components:
        try:
            tables[cid] = (huffman[(0, dc_id)], huffman[(1, ac_id)])
        except KeyError:
            raise JpegParseError(offset, f'scan uses an undefined Huffman table for component {cid}') from None

    interval = restart_interval or len(units)
    expected_segments = ceil_div(len(units), interval) if units else 1
    if len(segments) < expected_segments:
        raise JpegParseError(offset, 'truncated scan: missing restart intervals')

    for segment_index in range(expected_segments):
        reader = BitReader(segments[segment_index], offset)
        predictors = {cid: 0 for cid, _, _ in scan_components}
        for unit in units[segment_index * interval:(segment_index + 1) * interval]:
            for cid, row, col in unit:
                dc_table, ac_table = tables[cid]
                block[:] = [0] * 64
                predictors[cid] = _decode_block(reader, dc_table, ac_table, predictors[cid], block)
                frame.grids[cid][row, col] = block
        offset += len(segments[segment_index])
    frame.scanned.update(cid for cid, _, _ in scan_components)


def parse_jpeg(data):
    """Parse a baseline sequential Huffman JPEG into its quantized coefficients.

    Coefficients are returned exactly as stored (no dequantization); tables are
    read from the DQT segments.
    """
    data = bytes(data)
    if not data.startswith(b'\xff\xd8'):
        raise JpegParseError(0, 'missing SOI marker')
    quant_tables = {}
    huffman = {}
    frame = None
    restart_interval = 0
    pos = 2
    while True:
        if pos >= len(data):
            raise JpegParseError(pos, 'truncated stream: missing EOI marker')
        if data[pos] != 0xFF:
            raise JpegParseError(pos, 'expected a marker')
        while pos < len(data) and data[pos] == 0xFF:
            pos += 1
        if pos >= len(data):
            raise JpegParseError(pos, 'truncated stream: marker without code')
        marker = data[pos]
        pos += 1
        if marker == EOI:
            break
        if marker == SOI or 0xD0 <= marker <= 0xD7 or marker == 0x01:
            continue
        if pos + 2 > len(data):
            raise JpegParseError(pos, 'truncated segment length')
        length = struct.unpack('>H', data[pos:pos + 2])[0]
        if length < 2 or pos + length > len(data):
            raise JpegParseError(pos, f'truncated segment 0x{marker:02X}')
        payload = data[pos + 2:pos + length]
        segment_offset = pos
        pos += length

        if marker in SOF_UNSUPPORTED:
            raise UnsupportedFormat(f'{SOF_UNSUPPORTED[marker]} JPEG is not supported')
        if marker == DQT:
            _read_dqt(payload, segment_offset, quant_tables)
        elif marker == DHT:
            _read_dht(payload, segment_offset, huffman)
        elif marker in SOF_BASELINE:
            if frame is not None:
                raise JpegParseError(segment_offset, 'multiple frame headers')
            frame = _Frame(segment_offset, payload)
        elif marker == DRI:
            restart_interval = struct.unpack('>H', payload[:2])[0]
        elif marker == SOS:
            if frame is None:
                raise JpegParseError(segment_offset, 'scan before frame header')
            count = payload[0]
            if len(payload) < 1 + 2 * count + 3:
                raise JpegParseError(segment_offset, 'truncated scan header')
            scan_components = []
            for i in range(count):
                cid, selectors = payload[1 + 2 * i:3 + 2 * i]
                scan_components.append((cid, selectors >> 4, selectors & 0x0F))
            ss, se, approximation = payload[1 + 2 * count:4 + 2 * count]
            if (ss, se, approximation) != (0, 63, 0):
                raise UnsupportedFormat('spectral selection or successive approximation scan')
            segments, pos = _entropy_segments(data, pos)
            _decode_scan(frame, scan_components, huffman, restart_interval, segments, pos)

    if frame is None:
        raise JpegParseError(pos, 'no frame header')
    missing = [cid for cid, _, _, _ in frame.components if cid not in frame.scanned]
    if missing:
        raise JpegParseError(pos, f'components {missing} have no scan data')
    return _build(frame, quant_tables, pos)


def _read_dqt(payload, offset, quant_tables):
    i = 0
    while i < len(payload):
        precision, table_id = payload[i] >> 4, payload[i] & 0x0F
        size = 128 if precision else 64
        if i + 1 + size > len(payload):
            raise JpegParseError(offset, 'truncated quantization table')
        if precision:
            values = struct.unpack(f'>{64}H', payload[i + 1:i + 1 + size])
            if max(values) > 255:
                raise UnsupportedFormat('16-bit quantization tables')
        else:
            values = tuple(payload[i + 1:i + 1 + size])
        try:
            quant_tables[table_id] = QuantTable(values)
        except InvalidArgument as exc:
            raise JpegParseError(offset, str(exc)) from None
        i += 1 + size


def _read_dht(payload, offset, huffman):
    i = 0
    while i < len(payload):
        if i + 17 > len(payload):
            raise JpegParseError(offset, 'truncated Huffman table')
        table_class, destination = payload[i] >> 4, payload[i] & 0x0F
        bits = tuple(payload[i + 1:i + 17])
        count = sum(bits)
        if i + 17 + count > len(payload):
            raise JpegParseError(offset, 'truncated Huffman table')
        values = tuple(payload[i + 17:i + 17 + count])
        huffman[(table_class, destination)] = HuffmanTable(bits, values)
        i += 17 + count


def _build(frame, quant_tables, offset):
    shell = QuantizedJpeg.__new__(QuantizedJpeg)
    object.__setattr__(shell, 'width', frame.width)
    object.__setattr__(shell, 'height', frame.height)
    sized = [Component(cid, h, v, tq, np.zeros((1, 1, 64), dtype=np.int32)) for cid, h, v, tq in frame.components]
    components = []
    for index, (cid, h, v, table_id) in enumerate(frame.components):
        if table_id not in quant_tables:
            raise JpegParseError(offset, f'component {cid} uses undefined quantization table {table_id}')
        rows, cols = shell.expected_grid(index, sized)
        zz = frame.grids[cid][:rows, :cols]
        natural = np.empty_like(zz)
        natural[..., ZIGZAG] = zz
        components.append(Component(cid, h, v, table_id, natural))
    used = {c.table_id for c in components}
    return QuantizedJpeg(
        frame.width, frame.height, tuple(components),
        {table_id: quant_tables[table_id] for table_id in used},
    )


def dump_coefficients(j):
    """Debug dump: one line per block -- channel, block row, block col, 64 coefficients."""
    lines = []
    for channel, component in enumerate(j.components):
        rows, cols = component.grid_shape
        for r in range(rows):
            for c in range(cols):
                values = ' '.join(str(v) for v in component.coefficients[r, c].tolist())
                lines.append(f'{channel} {r} {c} {values}')
    return '\n'.join(lines) + '\n'
