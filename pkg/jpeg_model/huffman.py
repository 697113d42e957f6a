"""Huffman tables and the bit-level reader/writer of the entropy-coded segment."""
from dataclasses import dataclass
from functools import cached_property

from .exceptions import InvalidArgument, JpegParseError

# Typical tables of the JPEG standard (annex K.3).
STD_DC_LUMINANCE_BITS = (0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0)
STD_DC_LUMINANCE_VALUES = tuple(range(12))

STD_DC_CHROMINANCE_BITS = (0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0)
STD_DC_CHROMINANCE_VALUES = tuple(range(12))

STD_AC_LUMINANCE_BITS = (0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d)
STD_AC_LUMINANCE_VALUES = (
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07,
    0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52, 0xd1, 0xf0,
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49,
    0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
    0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7,
    0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5,
    0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2,
    0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8,
    0xf9, 0xfa,
)

STD_AC_CHROMINANCE_BITS = (0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77)
STD_AC_CHROMINANCE_VALUES = (
    0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71,
    0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33, 0x52, 0xf0,
    0x15, 0x62, 0x72, 0xd1, 0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18, 0x19, 0x1a, 0x26,
    0x27, 0x28, 0x29, 0x2a, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48,
    0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68,
    0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87,
    0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5,
    0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3,
    0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda,
    0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8,
    0xf9, 0xfa,
)


@dataclass(frozen=True)
class HuffmanTable:
    bits: tuple
    values: tuple

    def __post_init__(self):
        if len(self.bits) != 16:
            raise InvalidArgument('Huffman table needs 16 code-length counts')
        if sum(self.bits) != len(self.values):
            raise InvalidArgument('Huffman code-length counts do not match the symbol list')

    @cached_property
    def codes(self):
        """Symbol -> code bit string, generated as in annex C of the standard."""
        codes = {}
        code = 0
        k = 0
        for length, count in enumerate(self.bits, start=1):
            for _ in range(count):
                codes[self.values[k]] = format(code, f'0{length}b')
                code += 1
                k += 1
            code <<= 1
        return codes

    @cached_property
    def lookup(self):
        return {code: symbol for symbol, code in self.codes.items()}

    @cached_property
    def lengths(self):
        return tuple(length for length, count in enumerate(self.bits, start=1) if count)

    def payload(self, table_class, destination):
        """DHT segment body for this table."""
        return bytes([table_class << 4 | destination, *self.bits, *self.values])


STD_DC_LUMINANCE = HuffmanTable(STD_DC_LUMINANCE_BITS, STD_DC_LUMINANCE_VALUES)
STD_AC_LUMINANCE = HuffmanTable(STD_AC_LUMINANCE_BITS, STD_AC_LUMINANCE_VALUES)
STD_DC_CHROMINANCE = HuffmanTable(STD_DC_CHROMINANCE_BITS, STD_DC_CHROMINANCE_VALUES)
STD_AC_CHROMINANCE = HuffmanTable(STD_AC_CHROMINANCE_BITS, STD_AC_CHROMINANCE_VALUES)


def category(value):
    """Magnitude category (number of extra bits) of a DC difference or AC value."""
    return abs(int(value)).bit_length()


def value_bits(value, size):
    if value < 0:
        value += (1 << size) - 1
    return format(value, f'0{size}b')


class BitReader:
    """Reads an unstuffed entropy-coded segment bit by bit."""

    def __init__(self, data, offset=0):
        self._bits = format(int.from_bytes(data, 'big'), f'0{len(data) * 8}b') if data else ''
        self._size = len(self._bits)
        self._offset = offset
        self.pos = 0

    @property
    def offset(self):
        return self._offset + self.pos // 8

    def decode(self, table):
        lookup = table.lookup
        bits = self._bits
        for length in table.lengths:
            if self.pos + length > self._size:
                break
            symbol = lookup.get(bits[self.pos:self.pos + length])
            if symbol is not None:
                self.pos += length
                return symbol
        if self.pos + table.lengths[-1] > self._size:
            raise JpegParseError(self.offset, 'truncated entropy-coded data')
        raise JpegParseError(self.offset, 'invalid Huffman code')

    def receive(self, size):
        """Read ``size`` extra bits and sign-extend them (EXTEND procedure)."""
        if size == 0:
            return 0
        if self.pos + size > self._size:
            raise JpegParseError(self.offset, 'truncated entropy-coded data')
        value = int(self._bits[self.pos:self.pos + size], 2)
        self.pos += size
        if value < 1 << (size - 1):
            value -= (1 << size) - 1
        return value


class BitWriter:
    def __init__(self):
        self._parts = []

    def write(self, bit_string):
        self._parts.append(bit_string)

    def write_value(self, value, size):
        if size:
            self._parts.append(value_bits(value, size))

    def getvalue(self):
        """Byte-aligned (1-padded) and byte-stuffed segment data."""
        bits = ''.join(self._parts)
        if not bits:
            return b''
        bits += '1' * (-len(bits) % 8)
        data = int(bits, 2).to_bytes(len(bits) // 8, 'big')
        return data.replace(b'\xff', b'\xff\x00')
