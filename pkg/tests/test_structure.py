import random

import pytest

from forestgen import random_shape
from rfzip.structure import (DEFAULT_FRAME_BITS, lzw_compress, lzw_decompress,
                             pack_structures, parse_stream, serialize_stream,
                             unpack_all, unpack_structure)
from rfzip.bitio import ByteCursor
from rfzip.zaks import ZaksSequence, zaks_encode_shape


def random_sequences(rng, count, max_internal=40):
    return [zaks_encode_shape(random_shape(rng, rng.randint(0, max_internal)))
            for _ in range(count)]


def test_repetition_compresses_well():
    seqs = [ZaksSequence("100")] * 1000
    stream = pack_structures(seqs)
    raw_bytes = (3000 + 7) // 8
    assert stream.compressed_bytes() < raw_bytes / 4


def test_single_tree_single_frame():
    stream = pack_structures([ZaksSequence("100")])
    assert len(stream.frames) == 1
    assert stream.tree_index == [(0, 0)]
    assert unpack_structure(stream, 0).bits == "100"


def test_pack_unpack_roundtrip():
    rng = random.Random(5)
    for _ in range(25):
        seqs = random_sequences(rng, rng.randint(1, 60))
        stream = pack_structures(seqs)
        assert unpack_all(stream) == "".join(s.bits for s in seqs)


@pytest.mark.parametrize("tree_pick", ["first", "middle", "last"])
def test_random_access_matches_concatenation(tree_pick):
    rng = random.Random(17)
    seqs = random_sequences(rng, 101)
    stream = pack_structures(seqs, frame_bits=509)  # force many frames
    t = {"first": 0, "middle": 50, "last": 100}[tree_pick]
    assert unpack_structure(stream, t).bits == seqs[t].bits


def test_random_access_all_trees_small_frames():
    rng = random.Random(23)
    seqs = random_sequences(rng, 64, max_internal=30)
    stream = pack_structures(seqs, frame_bits=193)
    for t, s in enumerate(seqs):
        assert unpack_structure(stream, t).bits == s.bits


def test_tree_spanning_frames():
    big = zaks_encode_shape(random_shape(random.Random(3), 500))  # 1001 bits
    stream = pack_structures([big], frame_bits=128)
    assert len(stream.frames) > 1
    assert unpack_structure(stream, 0).bits == big.bits


def test_index_errors():
    stream = pack_structures([ZaksSequence("0")])
    with pytest.raises(IndexError):
        unpack_structure(stream, 1)
    with pytest.raises(IndexError):
        unpack_structure(stream, -1)


def test_frame_independence():
    # Decoding any single frame works without touching earlier frames.
    rng = random.Random(9)
    seqs = random_sequences(rng, 40)
    stream = pack_structures(seqs, frame_bits=257)
    from rfzip.structure import _frame_bits
    whole = unpack_all(stream)
    pos = 0
    for f in range(len(stream.frames)):
        alone = _frame_bits(stream, f)
        assert whole[pos:pos + len(alone)] == alone
        pos += len(alone)


def test_wire_roundtrip():
    rng = random.Random(77)
    seqs = random_sequences(rng, 30)
    stream = pack_structures(seqs, frame_bits=401)
    blob = serialize_stream(stream)
    back = parse_stream(ByteCursor(blob))
    assert back.frame_nbits == stream.frame_nbits
    assert back.frames == stream.frames
    assert back.tree_offsets == stream.tree_offsets


def test_default_frame_size_is_64kib():
    assert DEFAULT_FRAME_BITS == 64 * 1024 * 8


class TestLZW:
    def test_empty(self):
        assert lzw_compress(b"") == b""
        assert lzw_decompress(b"", 0) == b""

    def test_roundtrip_fuzz(self):
        rng = random.Random(1)
        for _ in range(40):
            n = rng.choice([1, 2, 3, 10, 257, 1000, 5000, 20000])
            if rng.random() < 0.5:
                data = bytes(rng.randrange(256) for _ in range(n))
            else:
                data = bytes(rng.choice(b"abc") for _ in range(n))
            assert lzw_decompress(lzw_compress(data), n) == data

    def test_dictionary_freeze_at_max(self):
        # Random bytes long enough to exhaust all 4096 dictionary entries.
        rng = random.Random(2)
        data = bytes(rng.randrange(256) for _ in range(30000))
        assert lzw_decompress(lzw_compress(data), len(data)) == data

    def test_kwkwk_pattern(self):
        data = b"abababababababab" * 10
        assert lzw_decompress(lzw_compress(data), len(data)) == data
