"""Error types shared by every app of the toolkit."""


class ForensicsError(Exception):
    """Base class for toolkit errors."""


class InvalidArgument(ForensicsError, ValueError):
    pass


class UnsupportedFormat(ForensicsError):
    """The bitstream uses a JPEG process outside baseline sequential Huffman."""


class JpegParseError(ForensicsError):
    def __init__(self, offset, message):
        super().__init__(f'{message} (byte offset {offset})')
        self.offset = offset


class DegenerateInput(ForensicsError, ValueError):
    """Input is valid but too small or too flat for the requested analysis."""


class NotFound(ForensicsError, LookupError):
    pass
