import math
import random

from hypothesis import given, settings
from hypothesis import strategies as st

from rfzip.arith import (arithmetic_decode_binary, arithmetic_encode_binary,
                         payload_bit_length, quantize_p1)

_HEADER_BITS = 16  # the u16 fixed-point probability


def empirical_entropy(bits):
    n = len(bits)
    k = sum(bits)
    if n == 0 or k == 0 or k == n:
        return 0.0
    p = k / n
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def test_all_zeros_is_tiny():
    bits = [0] * 1024
    assert payload_bit_length(1 / 1024, bits) < 32
    assert arithmetic_decode_binary(arithmetic_encode_binary(1 / 1024, bits), 1024) == bits


def test_balanced_four_bits_within_two_of_entropy():
    bits = [0, 1, 0, 1]
    assert payload_bit_length(0.5, bits) <= 4 + 2


def test_probability_clamped_to_open_interval():
    assert quantize_p1(0.0) == 1
    assert quantize_p1(1.0) == 65535
    assert quantize_p1(-3.0) == 1
    bits = [1, 0, 1]
    assert arithmetic_decode_binary(arithmetic_encode_binary(0.0, bits), 3) == bits


@given(st.lists(st.integers(min_value=0, max_value=1), max_size=300),
       st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
@settings(max_examples=150, deadline=None)
def test_roundtrip_property(bits, p1):
    encoded = arithmetic_encode_binary(p1, bits)
    assert arithmetic_decode_binary(encoded, len(bits)) == bits


def test_roundtrip_long_skewed_streams():
    rng = random.Random(6)
    for trial in range(40):
        n = rng.randint(1, 5000)
        p = rng.choice([0.001, 0.01, 0.3, 0.5, 0.9, 0.999])
        bits = [1 if rng.random() < p else 0 for _ in range(n)]
        encoded = arithmetic_encode_binary(p, bits)
        assert arithmetic_decode_binary(encoded, n) == bits, trial


def test_payload_within_two_bits_of_empirical_entropy():
    # Coding with the sequence's own empirical probability; bound checked
    # including the 16-bit header.
    rng = random.Random(8)
    for trial in range(300):
        n = rng.randint(8, 4096)
        p = rng.uniform(0.01, 0.99)
        bits = [1 if rng.random() < p else 0 for _ in range(n)]
        p_hat = sum(bits) / n
        payload = payload_bit_length(p_hat, bits)
        h = empirical_entropy(bits)
        assert payload <= n * h + 2, (trial, n, p_hat, payload, n * h)
        total = payload + _HEADER_BITS
        assert total <= n * h + 2 + _HEADER_BITS


def test_decoding_is_deterministic():
    bits = [1, 0, 0, 1, 1, 1, 0]
    e1 = arithmetic_encode_binary(0.6, bits)
    e2 = arithmetic_encode_binary(0.6, bits)
    assert e1 == e2
