import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfzip.bitio import BitReader, ByteCursor
from rfzip.entropy import (EmpiricalDistribution, average_length,
                           build_huffman, dictionary_cost, huffman_decode,
                           huffman_encode, kl_divergence, parse_table,
                           sample_counts, serialize_table)
from rfzip.errors import (AlphabetMismatch, EmptyDistribution, TruncatedStream,
                          UnknownSymbol)


def brute_force_optimal_average(probs, max_len):
    """Minimal average length over ALL prefix-free length assignments."""
    best = math.inf
    b = len(probs)
    for lens in itertools.product(range(1, max_len + 1), repeat=b):
        if sum(2 ** -l for l in lens) <= 1.0 + 1e-12:  # Kraft feasibility
            avg = sum(p * l for p, l in zip(probs, lens))
            best = min(best, avg)
    return best


def test_half_quarter_quarter_matches_brute_force():
    dist = EmpiricalDistribution((2, 1, 1))
    table = build_huffman(dist)
    assert sorted(table.code_lengths) == [1, 2, 2]
    r = average_length(table, dist)
    assert r == 1.5
    assert r == pytest.approx(brute_force_optimal_average((0.5, 0.25, 0.25), 3))
    assert r == pytest.approx(dist.entropy())


def test_random_small_tables_match_brute_force():
    rng = random.Random(3)
    for _ in range(50):
        b = rng.randint(2, 5)
        counts = tuple(rng.randint(1, 40) for _ in range(b))
        dist = EmpiricalDistribution(counts)
        table = build_huffman(dist)
        r = average_length(table, dist)
        oracle = brute_force_optimal_average(dist.probabilities, b)
        assert r == pytest.approx(oracle), (counts, table.code_lengths)


def test_single_symbol_degenerate():
    table = build_huffman(EmpiricalDistribution((0, 9, 0)))
    assert table.solo_symbol == 1
    assert huffman_encode(table, [1] * 50).bit_length == 0
    assert huffman_decode(table, BitReader(b""), 50) == [1] * 50


def test_uniform_four_symbols():
    table = build_huffman(EmpiricalDistribution((3, 3, 3, 3)))
    assert list(table.code_lengths) == [2, 2, 2, 2]


def test_empty_distribution_rejected():
    with pytest.raises(EmptyDistribution):
        build_huffman(EmpiricalDistribution((0, 0)))


def test_encode_length_is_sum_of_code_lengths():
    table = build_huffman(EmpiricalDistribution((2, 1, 1)))
    w = huffman_encode(table, [0, 1, 2, 0])
    assert w.bit_length == 6


def test_empty_sequence():
    table = build_huffman(EmpiricalDistribution((2, 1, 1)))
    assert huffman_encode(table, []).bit_length == 0


def test_unknown_symbol():
    table = build_huffman(EmpiricalDistribution((2, 1, 0)))
    with pytest.raises(UnknownSymbol):
        huffman_encode(table, [2])


def test_truncated_stream():
    table = build_huffman(EmpiricalDistribution((2, 1, 1)))
    w = huffman_encode(table, [1, 2])
    reader = BitReader(w.getvalue(), end_bit=w.bit_length)
    with pytest.raises(TruncatedStream):
        huffman_decode(table, reader, 3)


@given(st.lists(st.integers(min_value=0, max_value=7), min_size=0, max_size=200),
       st.integers())
@settings(max_examples=120, deadline=None)
def test_roundtrip_property(symbols, seed):
    rng = random.Random(seed)
    counts = [rng.randint(0, 30) for _ in range(8)]
    for s in symbols:
        counts[s] += 1
    if sum(counts) == 0:
        counts[0] = 1
    table = build_huffman(EmpiricalDistribution(tuple(counts)))
    w = huffman_encode(table, symbols)
    reader = BitReader(w.getvalue(), end_bit=w.bit_length)
    assert huffman_decode(table, reader, len(symbols)) == symbols
    assert reader.tell() == w.bit_length  # consumes exactly the emitted bits


def test_decode_can_start_at_any_symbol_boundary():
    table = build_huffman(EmpiricalDistribution((8, 4, 2, 2)))
    symbols = [0, 1, 2, 3, 0, 0, 1]
    w = huffman_encode(table, symbols)
    data = w.getvalue()
    codes = table.codewords()
    offset = 0
    for i, s in enumerate(symbols):
        reader = BitReader(data, start_bit=offset, end_bit=w.bit_length)
        assert huffman_decode(table, reader, len(symbols) - i) == symbols[i:]
        offset += codes[s][1]


def test_entropy_bound_on_sampled_counts():
    rng = np.random.default_rng(9)
    for _ in range(100):
        b = int(rng.integers(2, 64))
        probs = rng.dirichlet(np.full(b, rng.uniform(0.05, 2.0)))
        dist = sample_counts(probs, 100_000, rng)
        if sum(1 for c in dist.counts if c) < 2:
            continue
        table = build_huffman(dist)
        r = average_length(table, dist)
        h = dist.entropy()
        assert h <= r + 1e-9
        assert r < h + 1


def test_canonical_determinism():
    counts = (7, 7, 3, 3, 1, 1, 1, 1)
    t1 = build_huffman(EmpiricalDistribution(counts))
    t2 = build_huffman(EmpiricalDistribution(counts))
    assert serialize_table(t1) == serialize_table(t2)
    assert t1.codewords() == t2.codewords()


def test_table_serialization_roundtrip():
    rng = random.Random(12)
    for _ in range(30):
        b = rng.randint(1, 40)
        counts = tuple(rng.randint(0, 20) for _ in range(b))
        if sum(counts) == 0:
            counts = counts[:-1] + (1,)
        table = build_huffman(EmpiricalDistribution(counts))
        blob = serialize_table(table)
        back = parse_table(ByteCursor(blob))
        assert back == table


class TestKL:
    def test_self_divergence_zero(self):
        p = EmpiricalDistribution((3, 5, 2))
        assert kl_divergence(p, p) == 0.0

    def test_two_term_value(self):
        # 0.5*log2(0.5/0.25) + 0.5*log2(0.5/0.75), evaluated directly
        expected = 0.5 * math.log2(0.5 / 0.25) + 0.5 * math.log2(0.5 / 0.75)
        got = kl_divergence(EmpiricalDistribution((1, 1)), (0.25, 0.75))
        assert got == pytest.approx(expected)
        assert got == pytest.approx(0.2075, abs=1e-4)

    def test_support_mismatch_infinite(self):
        assert kl_divergence(EmpiricalDistribution((1, 0)), (0.0, 1.0)) == math.inf

    def test_alphabet_mismatch(self):
        with pytest.raises(AlphabetMismatch):
            kl_divergence(EmpiricalDistribution((1, 1)), (0.2, 0.3, 0.5))

    def test_nonnegative_and_zero_iff_equal(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            b = int(rng.integers(2, 6))
            p = rng.dirichlet(np.ones(b))
            q = rng.dirichlet(np.ones(b))
            counts = tuple(int(c) for c in rng.multinomial(200, p))
            dist = EmpiricalDistribution(counts)
            d = kl_divergence(dist, tuple(q))
            assert d >= 0.0
            assert kl_divergence(dist, dist.probabilities) == pytest.approx(0.0, abs=1e-12)


class TestDictionaryCost:
    def test_names_32_variables(self):
        cost = dictionary_cost("names", d=32)
        assert cost.alpha == 5 + 32
        assert cost.total == 37 * 32

    def test_categorical_two_values(self):
        assert dictionary_cost("categorical_split", c=2).alpha == 1 + 2

    def test_numerical_1024_observations(self):
        assert dictionary_cost("numerical_split", n=1024, c=100).alpha == 10 + 100

    def test_fits_by_analogy(self):
        assert dictionary_cost("fits", c=8).alpha == 3 + 8

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            dictionary_cost("nope", d=1)
