"""Framed LZW compression of the concatenated shape sequences.

The per-tree sequences are concatenated, split into frames of at most
DEFAULT_FRAME_BITS uncompressed bits, and each frame is LZW-compressed with a
fresh dictionary, so frames decode independently.  A per-tree index records
where each tree's first bit lives, giving random access per tree.

Frame wire format: varint(uncompressed_bit_count) || varint(flag) ||
varint(payload_byte_count) || payload, where flag 1 means LZW bytes and 0
means the packed bits stored raw (used whenever LZW would not shrink them).
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass

from .bitio import BitReader, BitWriter, ByteCursor, write_uvarint
from .errors import MalformedSequence, TruncatedStream
from .zaks import ZaksSequence

DEFAULT_FRAME_BITS = 64 * 1024 * 8  # 64 KiB of packed bits per frame

_LZW_MAX_WIDTH = 12
_LZW_MAX_CODES = 1 << _LZW_MAX_WIDTH


def lzw_compress(data: bytes) -> bytes:
    """LZW over bytes: codes 0..255 are literals, widths grow 9..12, then freeze."""
    if not data:
        return b""
    table: dict[bytes, int] = {bytes([i]): i for i in range(256)}
    next_code = 256
    width = 9
    out = BitWriter()
    w = data[0:1]
    for i in range(1, len(data)):
        c = data[i:i + 1]
        wc = w + c
        if wc in table:
            w = wc
            continue
        out.write_bits(table[w], width)
        if next_code < _LZW_MAX_CODES:
            table[wc] = next_code
            next_code += 1
            if next_code == (1 << width) and width < _LZW_MAX_WIDTH:
                width += 1
        w = c
    out.write_bits(table[w], width)
    return out.getvalue()


def lzw_decompress(data: bytes, expect_bytes: int) -> bytes:
    """Inverse of lzw_compress; `expect_bytes` bounds and terminates decoding."""
    if expect_bytes == 0:
        return b""
    reader = BitReader(data)
    entries: list[bytes] = [bytes([i]) for i in range(256)]
    width = 9
    try:
        code = reader.read_bits(width)
    except TruncatedStream:
        raise MalformedSequence("empty LZW stream") from None
    if code > 255:
        raise MalformedSequence("first LZW code must be a literal")
    prev = entries[code]
    out = bytearray(prev)
    while len(out) < expect_bytes:
        # The decoder's table lags the encoder's by one pending entry.
        if len(entries) + 1 == (1 << width) and width < _LZW_MAX_WIDTH:
            width += 1
        try:
            code = reader.read_bits(width)
        except TruncatedStream:
            raise MalformedSequence("LZW stream ended early") from None
        if code < len(entries):
            cur = entries[code]
        elif code == len(entries) and len(entries) < _LZW_MAX_CODES:
            cur = prev + prev[0:1]  # the KwKwK case
        else:
            raise MalformedSequence(f"LZW code {code} out of range")
        if len(entries) < _LZW_MAX_CODES:
            entries.append(prev + cur[0:1])
        out.extend(cur)
        prev = cur
    if len(out) != expect_bytes:
        raise MalformedSequence("LZW output overran the declared length")
    return bytes(out)


def _pack_bits(bits: str) -> bytes:
    w = BitWriter()
    w.write_bitstring(bits)
    return w.getvalue()


def _unpack_bits(data: bytes, nbits: int) -> str:
    out = []
    for pos in range(nbits):
        byte = data[pos >> 3]
        out.append("1" if (byte >> (7 - (pos & 7))) & 1 else "0")
    return "".join(out)


@dataclass
class StructureStream:
    """LZ frames of the concatenated sequences plus per-tree bit offsets."""

    frames: list[bytes]          # compressed (or raw-escaped) frame payloads
    frame_nbits: list[int]       # uncompressed bit count per frame
    frame_lzw: list[bool]        # False = frame stored as raw packed bits
    tree_offsets: list[int]      # global bit offset of each tree's first bit

    @property
    def total_bits(self) -> int:
        return sum(self.frame_nbits)

    @property
    def frame_starts(self) -> list[int]:
        starts = [0]
        for n in self.frame_nbits[:-1]:
            starts.append(starts[-1] + n)
        return starts

    @property
    def tree_index(self) -> list[tuple[int, int]]:
        """(frame ordinal, bit offset within the frame) per tree."""
        starts = self.frame_starts
        out = []
        for off in self.tree_offsets:
            f = bisect.bisect_right(starts, off) - 1
            out.append((f, off - starts[f]))
        return out

    def compressed_bytes(self) -> int:
        return sum(len(f) for f in self.frames)


def pack_structures(seqs: list[ZaksSequence], frame_bits: int = DEFAULT_FRAME_BITS) -> StructureStream:
    """Concatenate one sequence per tree (forest order) into LZW frames.

    A frame whose LZW form would not be smaller than the packed bits is
    stored raw: short or phase-shifted sequences otherwise expand.
    """
    offsets = []
    pos = 0
    for s in seqs:
        offsets.append(pos)
        pos += len(s.bits)
    allbits = "".join(s.bits for s in seqs)
    frames = []
    frame_nbits = []
    frame_lzw = []
    for start in range(0, len(allbits), frame_bits):
        chunk = allbits[start:start + frame_bits]
        packed = _pack_bits(chunk)
        compressed = lzw_compress(packed)
        if len(compressed) < len(packed):
            frames.append(compressed)
            frame_lzw.append(True)
        else:
            frames.append(packed)
            frame_lzw.append(False)
        frame_nbits.append(len(chunk))
    if not frames:
        frames, frame_nbits, frame_lzw = [b""], [0], [False]
    return StructureStream(frames=frames, frame_nbits=frame_nbits,
                           frame_lzw=frame_lzw, tree_offsets=offsets)


def _frame_bits(stream: StructureStream, f: int) -> str:
    nbits = stream.frame_nbits[f]
    if stream.frame_lzw[f]:
        raw = lzw_decompress(stream.frames[f], (nbits + 7) // 8)
    else:
        raw = stream.frames[f]
        if len(raw) != (nbits + 7) // 8:
            raise MalformedSequence("raw frame length mismatch")
    return _unpack_bits(raw, nbits)


def unpack_all(stream: StructureStream) -> str:
    return "".join(_frame_bits(stream, f) for f in range(len(stream.frames)))


def unpack_structure(stream: StructureStream, tree_id: int) -> ZaksSequence:
    """Extract one tree's sequence, decompressing only the frames that hold it."""
    if not (0 <= tree_id < len(stream.tree_offsets)):
        raise IndexError(f"tree {tree_id} out of range")
    start = stream.tree_offsets[tree_id]
    starts = stream.frame_starts
    f = bisect.bisect_right(starts, start) - 1
    bits = _frame_bits(stream, f)
    local = start - starts[f]
    # Scan the balance until the shape completes, pulling frames as needed.
    collected: list[str] = []
    ones = zeros = 0
    pos = local
    while True:
        if pos >= len(bits):
            f += 1
            if f >= len(stream.frames):
                raise MalformedSequence("structure stream ended inside a tree")
            bits = _frame_bits(stream, f)
            pos = 0
        ch = bits[pos]
        collected.append(ch)
        pos += 1
        if ch == "1":
            ones += 1
        else:
            zeros += 1
        if zeros == ones + 1:
            return ZaksSequence("".join(collected))


# ---------------------------------------------------------------------------
# Wire format
# ---------------------------------------------------------------------------

def serialize_stream(stream: StructureStream) -> bytes:
    out = bytearray()
    write_uvarint(out, len(stream.frames))
    for nbits, lzw, payload in zip(stream.frame_nbits, stream.frame_lzw,
                                   stream.frames):
        write_uvarint(out, nbits)
        write_uvarint(out, 1 if lzw else 0)
        write_uvarint(out, len(payload))
        out.extend(payload)
    write_uvarint(out, len(stream.tree_offsets))
    # Offsets are monotone; store deltas, as varints or fixed-width packed
    # fields, whichever is smaller (format byte 0 / 1).
    deltas = []
    prev = 0
    for off in stream.tree_offsets:
        deltas.append(off - prev)
        prev = off
    as_varints = bytearray([0])
    for d in deltas:
        write_uvarint(as_varints, d)
    width = max(deltas, default=0).bit_length()
    packed = BitWriter()
    for d in deltas:
        packed.write_bits(d, width)
    as_fixed = bytes([1, width]) + packed.getvalue()
    out += as_varints if len(as_varints) <= len(as_fixed) else as_fixed
    return bytes(out)


def parse_stream(cur: ByteCursor) -> StructureStream:
    n_frames = cur.read_uvarint()
    frames = []
    frame_nbits = []
    frame_lzw = []
    for _ in range(n_frames):
        nbits = cur.read_uvarint()
        flag = cur.read_uvarint()
        if flag not in (0, 1):
            raise MalformedSequence(f"unknown frame flag {flag}")
        nbytes = cur.read_uvarint()
        frame_nbits.append(nbits)
        frame_lzw.append(flag == 1)
        frames.append(cur.read(nbytes))
    n_trees = cur.read_uvarint()
    fmt = cur.read_u8()
    deltas = []
    if fmt == 0:
        deltas = [cur.read_uvarint() for _ in range(n_trees)]
    elif fmt == 1:
        width = cur.read_u8()
        if width > 56:
            raise MalformedSequence("implausible offset field width")
        payload = cur.read((n_trees * width + 7) // 8)
        reader = BitReader(payload, end_bit=n_trees * width)
        deltas = [reader.read_bits(width) for _ in range(n_trees)]
    else:
        raise MalformedSequence(f"unknown offset index format {fmt}")
    offsets = []
    pos = 0
    for d in deltas:
        pos += d
        offsets.append(pos)
    return StructureStream(frames=frames, frame_nbits=frame_nbits,
                           frame_lzw=frame_lzw, tree_offsets=offsets)
