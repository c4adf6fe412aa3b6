"""Fixed-width bit packing, MSB-first.

Bit position 0 is the most significant bit of byte 0.  Values are written
big-endian within their field.  The final byte of a serialized stream is
zero-padded; padding bits are not part of the stream length.  Field widths are
unbounded (a ~1000-bit subset index is a single write).
"""

from __future__ import annotations


class BitWriter:
    def __init__(self) -> None:
        self._buf = bytearray()
        self._acc = 0  # pending bits, MSB side first
        self._nacc = 0
        self._nbits = 0

    def write(self, value: int, width: int) -> None:
        if width < 0:
            raise ValueError("width must be non-negative")
        if value < 0 or (width < value.bit_length()):
            raise ValueError(f"value {value} does not fit in {width} bits")
        self._acc = (self._acc << width) | value
        self._nacc += width
        self._nbits += width
        while self._nacc >= 8:
            self._nacc -= 8
            self._buf.append((self._acc >> self._nacc) & 0xFF)
        self._acc &= (1 << self._nacc) - 1

    @property
    def bit_length(self) -> int:
        return self._nbits

    def getvalue(self) -> bytes:
        out = bytearray(self._buf)
        if self._nacc:
            out.append((self._acc << (8 - self._nacc)) & 0xFF)
        return bytes(out)


class BitUnderflowError(ValueError):
    """Read past the end of the stream."""


class BitReader:
    def __init__(self, data: bytes, nbits: int | None = None) -> None:
        self._data = data
        self._nbits = 8 * len(data) if nbits is None else nbits
        if self._nbits > 8 * len(data):
            raise ValueError("declared bit length exceeds the data")
        self._pos = 0

    @property
    def pos(self) -> int:
        return self._pos

    @property
    def remaining(self) -> int:
        return self._nbits - self._pos

    def read(self, width: int) -> int:
        if width < 0:
            raise ValueError("width must be non-negative")
        if self._pos + width > self._nbits:
            raise BitUnderflowError(
                f"read of {width} bits at {self._pos} exceeds {self._nbits}"
            )
        value = 0
        pos = self._pos
        need = width
        while need:
            byte = self._data[pos >> 3]
            offset = pos & 7
            take = min(8 - offset, need)
            chunk = (byte >> (8 - offset - take)) & ((1 << take) - 1)
            value = (value << take) | chunk
            pos += take
            need -= take
        self._pos = pos
        return value


def flip_bit(data: bytearray, pos: int) -> None:
    """Invert the bit at absolute stream position pos, in place."""
    data[pos >> 3] ^= 0x80 >> (pos & 7)
