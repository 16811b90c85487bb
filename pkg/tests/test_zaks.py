import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forestgen import random_shape
from rfzip.errors import MalformedSequence
from rfzip.forest import Node, NumericSplit
from rfzip.zaks import (is_valid_zaks, shape_counts, zaks_decode,
                        zaks_encode, zaks_encode_shape)

REFERENCE_BITS = "111100100100111001000"

# The ten-internal-node reference tree, written out explicitly: a leaf is
# None, an internal node is (left, right).
REFERENCE_SHAPE = (
    (  # left child of the root: two internal children
        ((None, None), (None, None)),
        (None, None),
    ),
    (  # right child of the root: internal left child, leaf right child
        ((None, None), (None, None)),
        None,
    ),
)


def test_reference_tree_encodes_exactly():
    assert zaks_encode_shape(REFERENCE_SHAPE).bits == REFERENCE_BITS


def test_reference_tree_via_labeled_nodes():
    # The same shape as a labeled tree goes through zaks_encode identically.
    def build(shape):
        if shape is None:
            return Node(fit=0.0)
        return Node(fit=0.0, var=0, split=NumericSplit(1.0),
                    left=build(shape[0]), right=build(shape[1]))
    assert zaks_encode(build(REFERENCE_SHAPE)).bits == REFERENCE_BITS


def test_reference_bits_decode_to_ten_internal_nodes():
    shape = zaks_decode(REFERENCE_BITS)
    assert shape == REFERENCE_SHAPE
    assert shape_counts(shape) == (10, 11)


def test_sequence_length_is_2n_plus_1():
    rng = random.Random(0)
    for _ in range(50):
        n = rng.randint(1, 80)
        z = zaks_encode_shape(random_shape(rng, n))
        assert len(z.bits) == 2 * n + 1
        assert z.n_nodes == n


def test_single_leaf_degenerate():
    assert zaks_encode_shape(None).bits == "0"
    assert zaks_decode("0") is None


def test_root_with_two_leaves():
    assert zaks_encode_shape((None, None)).bits == "100"
    assert zaks_decode("100") == (None, None)


@pytest.mark.parametrize("bits", ["110", "", "1", "011", "10", "1000", "10011",
                                  "100100", "2", "1x0"])
def test_malformed_sequences_rejected(bits):
    assert not is_valid_zaks(bits)
    with pytest.raises(MalformedSequence):
        zaks_decode(bits)


def test_trailing_bits_rejected():
    with pytest.raises(MalformedSequence):
        zaks_decode("1000")  # "100" plus a trailing bit fails condition iii/ii


def test_roundtrip_seeded():
    rng = random.Random(13)
    for _ in range(300):
        shape = random_shape(rng, rng.randint(0, 120))
        z = zaks_encode_shape(shape)
        assert is_valid_zaks(z.bits)
        assert zaks_decode(z) == shape


def test_roundtrip_large_shapes():
    rng = random.Random(29)
    for n in (1000, 10_000):
        shape = random_shape(rng, n)
        z = zaks_encode_shape(shape)
        assert len(z.bits) == 2 * n + 1
        assert zaks_decode(z.bits) == shape


@given(st.integers(min_value=0, max_value=200), st.integers())
@settings(max_examples=100, deadline=None)
def test_roundtrip_property(n, seed):
    rng = random.Random(seed)
    shape = random_shape(rng, n)
    assert zaks_decode(zaks_encode_shape(shape)) == shape


def test_single_bit_flip_always_rejected():
    # A flip changes the zero/one balance, so condition ii must fail.
    rng = random.Random(31)
    for _ in range(200):
        bits = zaks_encode_shape(random_shape(rng, rng.randint(1, 60))).bits
        pos = rng.randrange(len(bits))
        mutated = bits[:pos] + ("1" if bits[pos] == "0" else "0") + bits[pos + 1:]
        assert not is_valid_zaks(mutated)
