"""Binary arithmetic coder: 32-bit range coding with underflow (carry) tracking.

The 1-probability is quantized to 16-bit fixed point so encoder and decoder
agree exactly; it may vary per symbol (each symbol's model supplies its own).
Standalone streams carry the header u16(p1) || varint(bit count).
"""
from __future__ import annotations

from .bitio import BitReader, BitWriter, ByteCursor, write_uvarint

_BITS = 32
_FULL = (1 << _BITS) - 1
_HALF = 1 << (_BITS - 1)
_QUARTER = 1 << (_BITS - 2)
_THREE_QUARTER = _HALF + _QUARTER
_PROB_BITS = 16
_PROB_ONE = 1 << _PROB_BITS


def quantize_p1(p1: float) -> int:
    """Clamp and round a probability to 16-bit fixed point in [1, 65535]."""
    q = int(round(p1 * _PROB_ONE))
    return min(max(q, 1), _PROB_ONE - 1)


class BinaryArithmeticEncoder:
    """Writes bits into a BitWriter; call finish() exactly once."""

    __slots__ = ("_out", "_low", "_high", "_pending")

    def __init__(self, out: BitWriter) -> None:
        self._out = out
        self._low = 0
        self._high = _FULL
        self._pending = 0

    def _emit(self, bit: int) -> None:
        self._out.write_bit(bit)
        inv = bit ^ 1
        for _ in range(self._pending):
            self._out.write_bit(inv)
        self._pending = 0

    def encode(self, bit: int, p1_q16: int) -> None:
        span = self._high - self._low + 1
        # [low, split] codes 0; [split+1, high] codes 1.
        split = self._low + ((span * (_PROB_ONE - p1_q16)) >> _PROB_BITS) - 1
        if bit:
            self._low = split + 1
        else:
            self._high = split
        while True:
            if self._high < _HALF:
                self._emit(0)
            elif self._low >= _HALF:
                self._emit(1)
                self._low -= _HALF
                self._high -= _HALF
            elif self._low >= _QUARTER and self._high < _THREE_QUARTER:
                self._pending += 1
                self._low -= _QUARTER
                self._high -= _QUARTER
            else:
                break
            self._low <<= 1
            self._high = (self._high << 1) | 1

    def finish(self) -> None:
        """Pin the final interval with at most pending+2 bits."""
        self._pending += 1
        if self._low < _QUARTER:
            self._emit(0)
        else:
            self._emit(1)


class BinaryArithmeticDecoder:
    """Mirror of the encoder; reads from a (padded) BitReader."""

    __slots__ = ("_in", "_low", "_high", "_code")

    def __init__(self, reader: BitReader) -> None:
        self._in = reader
        self._low = 0
        self._high = _FULL
        self._code = reader.read_bits(_BITS)

    def decode(self, p1_q16: int) -> int:
        span = self._high - self._low + 1
        split = self._low + ((span * (_PROB_ONE - p1_q16)) >> _PROB_BITS) - 1
        if self._code > split:
            bit = 1
            self._low = split + 1
        else:
            bit = 0
            self._high = split
        while True:
            if self._high < _HALF:
                pass
            elif self._low >= _HALF:
                self._low -= _HALF
                self._high -= _HALF
                self._code -= _HALF
            elif self._low >= _QUARTER and self._high < _THREE_QUARTER:
                self._low -= _QUARTER
                self._high -= _QUARTER
                self._code -= _QUARTER
            else:
                break
            self._low <<= 1
            self._high = (self._high << 1) | 1
            self._code = (self._code << 1) | self._in.read_bit()
        return bit


def arithmetic_encode_binary(p1: float, bits) -> bytes:
    """Encode a 0/1 sequence under a fixed 1-probability; self-contained stream."""
    q = quantize_p1(p1)
    payload = BitWriter()
    enc = BinaryArithmeticEncoder(payload)
    for b in bits:
        enc.encode(int(b), q)
    enc.finish()
    header = bytearray()
    header.append(q & 0xFF)
    header.append(q >> 8)
    write_uvarint(header, payload.bit_length)
    return bytes(header) + payload.getvalue()


def arithmetic_decode_binary(data: bytes, count: int) -> list[int]:
    """Decode `count` symbols from a stream made by arithmetic_encode_binary."""
    cur = ByteCursor(data)
    q = cur.read_u16le()
    nbits = cur.read_uvarint()
    reader = BitReader(data, start_bit=cur.pos * 8, end_bit=cur.pos * 8 + nbits, pad=True)
    dec = BinaryArithmeticDecoder(reader)
    return [dec.decode(q) for _ in range(count)]


def payload_bit_length(p1: float, bits) -> int:
    """Payload bits (termination included, header excluded) for a sequence."""
    q = quantize_p1(p1)
    payload = BitWriter()
    enc = BinaryArithmeticEncoder(payload)
    for b in bits:
        enc.encode(int(b), q)
    enc.finish()
    return payload.bit_length
