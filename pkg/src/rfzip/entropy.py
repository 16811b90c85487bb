"""Empirical distributions, canonical Huffman coding, KL divergence, dictionary costs."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .bitio import BitReader, BitWriter, ByteCursor, write_uvarint
from .errors import (AlphabetMismatch, EmptyDistribution, TruncatedStream,
                     UnknownSymbol)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Symbol counts over the alphabet 0..B-1."""

    counts: tuple[int, ...]

    @property
    def b(self) -> int:
        return len(self.counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def probabilities(self) -> tuple[float, ...]:
        n = self.n
        if n == 0:
            raise EmptyDistribution("no samples")
        return tuple(c / n for c in self.counts)

    def entropy(self) -> float:
        """Empirical entropy in bits per symbol."""
        n = self.n
        if n == 0:
            raise EmptyDistribution("no samples")
        h = 0.0
        for c in self.counts:
            if c:
                p = c / n
                h -= p * math.log2(p)
        return h


def kl_divergence(p: EmpiricalDistribution, q) -> float:
    """D(P||Q) in bits; 0*log(0/q) = 0 and p*log(p/0) = +inf."""
    q_probs = q.probabilities if isinstance(q, EmpiricalDistribution) else tuple(q)
    p_probs = p.probabilities
    if len(q_probs) != len(p_probs):
        raise AlphabetMismatch(f"alphabets differ: {len(p_probs)} vs {len(q_probs)}")
    total = 0.0
    for pi, qi in zip(p_probs, q_probs):
        if pi == 0.0:
            continue
        if qi == 0.0:
            return math.inf
        total += pi * math.log2(pi / qi)
    return max(total, 0.0)


# ---------------------------------------------------------------------------
# Canonical Huffman
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HuffmanTable:
    """Per-symbol code lengths (0 = absent), canonical codewords derived.

    A table with exactly one present symbol is degenerate: the symbol is coded
    in zero bits (its stored length-1 entry only marks presence) and the Kraft
    equality is waived for it.
    """

    code_lengths: tuple[int, ...]

    @property
    def b(self) -> int:
        return len(self.code_lengths)

    @property
    def present(self) -> list[int]:
        return [s for s, l in enumerate(self.code_lengths) if l > 0]

    @property
    def solo_symbol(self) -> int | None:
        present = self.present
        return present[0] if len(present) == 1 else None

    def codewords(self) -> dict[int, tuple[int, int]]:
        """symbol -> (codeword, length), canonical (shorter first, ties by symbol)."""
        if self.solo_symbol is not None:
            return {self.solo_symbol: (0, 0)}
        ordered = sorted(self.present, key=lambda s: (self.code_lengths[s], s))
        out: dict[int, tuple[int, int]] = {}
        code = 0
        prev_len = self.code_lengths[ordered[0]] if ordered else 0
        for s in ordered:
            length = self.code_lengths[s]
            code <<= (length - prev_len)
            out[s] = (code, length)
            code += 1
            prev_len = length
        return out

    def decode_tables(self):
        """(first_code, first_index, count, symbols) per length for canonical decoding."""
        ordered = sorted(self.present, key=lambda s: (self.code_lengths[s], s))
        max_len = self.code_lengths[ordered[-1]] if ordered else 0
        count = [0] * (max_len + 1)
        for s in ordered:
            count[self.code_lengths[s]] += 1
        first_code = [0] * (max_len + 1)
        first_index = [0] * (max_len + 1)
        code = index = 0
        for length in range(1, max_len + 1):
            first_code[length] = code
            first_index[length] = index
            code = (code + count[length]) << 1
            index += count[length]
        return first_code, first_index, count, ordered


def build_huffman(dist: EmpiricalDistribution) -> HuffmanTable:
    """Optimal prefix code from counts, canonicalized.

    Heap ties break on (weight, lowest symbol index in the subtree) so two
    builds from identical counts give identical tables.
    """
    present = [(s, c) for s, c in enumerate(dist.counts) if c > 0]
    if not present:
        raise EmptyDistribution("cannot build a code for zero samples")
    lengths = [0] * dist.b
    if len(present) == 1:
        lengths[present[0][0]] = 1  # presence marker; coded in zero bits
        return HuffmanTable(tuple(lengths))
    # heap items: (weight, min symbol, id, member symbols)
    heap = [(c, s, [s]) for s, c in present]
    heapq.heapify(heap)
    while len(heap) > 1:
        w1, t1, m1 = heapq.heappop(heap)
        w2, t2, m2 = heapq.heappop(heap)
        for s in m1:
            lengths[s] += 1
        for s in m2:
            lengths[s] += 1
        heapq.heappush(heap, (w1 + w2, min(t1, t2), m1 + m2))
    table = HuffmanTable(tuple(lengths))
    # Kraft equality must hold exactly for non-degenerate tables.
    assert sum(2 ** -l for l in lengths if l) == 1.0
    return table


def average_length(table: HuffmanTable, dist: EmpiricalDistribution) -> float:
    """Expected bits per symbol of `table` under `dist` (degenerate tables cost 0)."""
    if table.solo_symbol is not None:
        return 0.0
    n = dist.n
    return sum(c * table.code_lengths[s] for s, c in enumerate(dist.counts) if c) / n


def huffman_encode(table: HuffmanTable, symbols, writer: BitWriter | None = None) -> BitWriter:
    """Append the codewords for `symbols`; returns the writer."""
    out = writer if writer is not None else BitWriter()
    codes = table.codewords()
    for s in symbols:
        try:
            code, length = codes[s]
        except KeyError:
            raise UnknownSymbol(f"symbol {s} has no codeword") from None
        if length:
            out.write_bits(code, length)
    return out


def huffman_decode(table: HuffmanTable, reader: BitReader, count: int) -> list[int]:
    """Decode exactly `count` symbols; the prefix property lets decoding start
    at any recorded symbol boundary."""
    solo = table.solo_symbol
    if solo is not None:
        return [solo] * count
    first_code, first_index, length_count, ordered = table.decode_tables()
    max_len = len(length_count) - 1
    out = []
    for _ in range(count):
        code = 0
        length = 0
        while True:
            code = (code << 1) | reader.read_bit()
            length += 1
            if length > max_len:
                raise TruncatedStream("codeword exceeds the table's maximum length")
            offset = code - first_code[length]
            if 0 <= offset < length_count[length]:
                out.append(ordered[first_index[length] + offset])
                break
    return out


def serialize_table(table: HuffmanTable) -> bytes:
    """varint(B) || per-symbol varint(code length)."""
    out = bytearray()
    write_uvarint(out, table.b)
    for l in table.code_lengths:
        write_uvarint(out, l)
    return bytes(out)


def parse_table(cur: ByteCursor) -> HuffmanTable:
    b = cur.read_uvarint()
    lengths = tuple(cur.read_uvarint() for _ in range(b))
    return HuffmanTable(lengths)


# ---------------------------------------------------------------------------
# Dictionary cost model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DictionaryCost:
    """Bits per dictionary line; total over an alphabet bounds the table cost."""

    alpha: float
    b: int

    @property
    def total(self) -> float:
        return self.alpha * self.b


def dictionary_cost(kind: str, *, d: int = 0, c: int = 0, n: int = 0) -> DictionaryCost:
    """Per-line dictionary cost in bits for each stream family.

    names:             log2(d) + d        (d = variable count)
    categorical_split: log2(C) + C        (C = distinct split values)
    numerical_split:   log2(n) + C        (n = training observations)
    fits:              log2(C) + C        (C = distinct fit values)
    """
    if kind == "names":
        alpha = math.log2(max(d, 1)) + d
        b = d
    elif kind == "categorical_split":
        alpha = math.log2(max(c, 1)) + c
        b = c
    elif kind == "numerical_split":
        alpha = math.log2(max(n, 1)) + c
        b = c
    elif kind == "fits":
        alpha = math.log2(max(c, 1)) + c
        b = c
    else:
        raise ValueError(f"unknown dictionary kind {kind!r}")
    return DictionaryCost(alpha=alpha, b=b)


def sample_counts(probs, n: int, rng: np.random.Generator) -> EmpiricalDistribution:
    """Counts of an n-symbol sample drawn from `probs` (multinomial draw)."""
    counts = rng.multinomial(n, np.asarray(probs, dtype=float))
    return EmpiricalDistribution(tuple(int(c) for c in counts))
