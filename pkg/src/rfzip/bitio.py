"""Bit-level I/O (MSB-first within bytes) and LEB128 varints."""
from __future__ import annotations

from .errors import TruncatedStream


class BitWriter:
    """Accumulates bits MSB-first; pads the final byte with zeros."""

    __slots__ = ("_bytes", "_acc", "_nacc", "_total")

    def __init__(self) -> None:
        self._bytes = bytearray()
        self._acc = 0
        self._nacc = 0
        self._total = 0

    @property
    def bit_length(self) -> int:
        return self._total

    def write_bit(self, bit: int) -> None:
        self._acc = (self._acc << 1) | (bit & 1)
        self._nacc += 1
        self._total += 1
        if self._nacc == 8:
            self._bytes.append(self._acc)
            self._acc = 0
            self._nacc = 0

    def write_bits(self, value: int, width: int) -> None:
        """Write the low `width` bits of `value`, most significant first."""
        for shift in range(width - 1, -1, -1):
            self.write_bit((value >> shift) & 1)

    def write_bitstring(self, bits: str) -> None:
        for ch in bits:
            self.write_bit(ch == "1")

    def getvalue(self) -> bytes:
        if self._nacc:
            return bytes(self._bytes) + bytes([self._acc << (8 - self._nacc)])
        return bytes(self._bytes)


class BitReader:
    """Reads bits MSB-first from a byte buffer, within [start_bit, end_bit).

    With pad=True, reads past end_bit return zeros instead of raising;
    the position still advances so tell() reports bits consumed.
    """

    __slots__ = ("_data", "_pos", "_end", "_pad")

    def __init__(self, data: bytes, start_bit: int = 0, end_bit: int | None = None,
                 pad: bool = False) -> None:
        self._data = data
        self._pos = start_bit
        self._end = len(data) * 8 if end_bit is None else end_bit
        self._pad = pad

    def tell(self) -> int:
        return self._pos

    def remaining(self) -> int:
        return self._end - self._pos

    def read_bit(self) -> int:
        if self._pos >= self._end:
            if self._pad:
                self._pos += 1
                return 0
            raise TruncatedStream(f"bit read past end at {self._pos}")
        byte = self._data[self._pos >> 3]
        bit = (byte >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return bit

    def read_bits(self, width: int) -> int:
        v = 0
        for _ in range(width):
            v = (v << 1) | self.read_bit()
        return v


def write_uvarint(out: bytearray, value: int) -> None:
    """Append an unsigned LEB128 varint."""
    if value < 0:
        raise ValueError("varints are unsigned")
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


class ByteCursor:
    """Bounds-checked sequential reader over a bytes-like region."""

    __slots__ = ("_data", "pos", "end")

    def __init__(self, data: bytes, start: int = 0, end: int | None = None) -> None:
        self._data = data
        self.pos = start
        self.end = len(data) if end is None else end

    def remaining(self) -> int:
        return self.end - self.pos

    def read(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise TruncatedStream(f"byte read of {n} past end at {self.pos}")
        chunk = self._data[self.pos:self.pos + n]
        self.pos += n
        return bytes(chunk)

    def read_u8(self) -> int:
        return self.read(1)[0]

    def read_u16le(self) -> int:
        b = self.read(2)
        return b[0] | (b[1] << 8)

    def read_u32le(self) -> int:
        return int.from_bytes(self.read(4), "little")

    def read_u64le(self) -> int:
        return int.from_bytes(self.read(8), "little")

    def read_uvarint(self) -> int:
        value = 0
        shift = 0
        while True:
            b = self.read_u8()
            value |= (b & 0x7F) << shift
            if not (b & 0x80):
                return value
            shift += 7
            if shift > 63:
                raise TruncatedStream("varint too long")
