import random
from pathlib import Path

import pytest

from forestgen import random_forest, random_observation
from rfzip.container import (ARITHMETIC, HUFFMAN, CompressOptions, compress,
                             decompress, inspect, load, predict_compressed)
from rfzip.errors import CorruptContainer
from rfzip.forest import (CLASSIFICATION, REGRESSION, CategoricalSplit, Forest,
                          Node, NumericSplit, Variable, VariableSchema,
                          forests_equal, parse_forest, predict)

FIXTURE = Path(__file__).parent / "fixtures" / "two_tree_depth2.json"
FAST = CompressOptions(seed=0, k_max=4, restarts=2)


def test_fixture_roundtrip():
    f = parse_forest(FIXTURE.read_text())
    assert forests_equal(f, decompress(compress(f, FAST)))


def test_random_forest_roundtrips():
    rng = random.Random(1)
    for trial in range(40):
        f = random_forest(rng)
        data = compress(f, CompressOptions(seed=trial, k_max=4, restarts=2))
        assert forests_equal(f, decompress(data)), trial


def test_trained_forest_roundtrips(small_trained_classifier, small_trained_regressor):
    for f in (small_trained_classifier, small_trained_regressor):
        assert forests_equal(f, decompress(compress(f, FAST)))


def test_single_leaf_regression_container():
    f = Forest(schema=VariableSchema((Variable("x", "numerical"),), 3),
               task=REGRESSION, trees=(Node(fit=2.5),))
    data = compress(f, FAST)
    report = inspect(data)
    assert report.names == 0
    assert report.splits == 0
    c = load(data)
    assert c.tables.fit_alphabet == 1
    assert forests_equal(f, decompress(data))


def test_prediction_equivalence_with_missing_values():
    rng = random.Random(3)
    for trial in range(15):
        f = random_forest(rng)
        data = compress(f, CompressOptions(seed=trial, k_max=4, restarts=2))
        c = load(data)
        g = decompress(data)
        for _ in range(12):
            x = random_observation(rng, f, missing_p=0.3)
            assert predict_compressed(c, x) == predict(g, x) == predict(f, x)


def test_access_accounting_touches_only_per_tree_segments():
    rng = random.Random(9)
    f = random_forest(rng, max_trees=12, d_range=(2, 4))
    data = compress(f, FAST)
    c = load(data)
    log = []
    predict_compressed(c, random_observation(rng, f, missing_p=0), access_log=log)
    assert len(log) == 3 * f.a  # names, splits, fits segment per tree
    for family, tree_id, start, end in log:
        assert (start, end) == c.tree_segments[family][tree_id]


def test_access_accounting_hundred_tree_container():
    rng = random.Random(10)
    f = random_forest(rng, d_range=(2, 4), n_trees=100)
    c = load(compress(f, FAST))
    log = []
    predict_compressed(c, random_observation(rng, f, missing_p=0), access_log=log)
    assert len({t for _fam, t, _s, _e in log}) == 100  # exactly 100 tree segments
    per_family = {}
    for fam, t, _s, _e in log:
        per_family.setdefault(fam, set()).add(t)
    assert all(len(trees) == 100 for trees in per_family.values())


def test_inspect_sections_sum_to_total():
    rng = random.Random(5)
    for _ in range(10):
        f = random_forest(rng)
        data = compress(f, FAST)
        rep = inspect(data)
        assert rep.total == len(data)
        assert (rep.structure + rep.names + rep.splits + rep.fits +
                rep.tables) == rep.total - 156
        d = rep.to_dict()
        assert d["total_bytes"] == len(data)


def test_appended_junk_is_ignored():
    rng = random.Random(8)
    f = random_forest(rng)
    data = compress(f, FAST)
    assert forests_equal(decompress(data + b"\x00\xff" * 33), decompress(data))
    x = random_observation(rng, f)
    assert predict_compressed(data + b"junk", x) == predict_compressed(data, x)


def test_truncation_raises_corrupt_container():
    rng = random.Random(13)
    f = random_forest(rng, max_trees=6)
    data = compress(f, FAST)
    for cut in (0, 3, 27, 100, len(data) // 2, len(data) - 1):
        with pytest.raises(CorruptContainer):
            decompress(data[:cut])


def test_bad_magic_and_version():
    rng = random.Random(14)
    f = random_forest(rng)
    data = bytearray(compress(f, FAST))
    with pytest.raises(CorruptContainer, match="magic"):
        decompress(b"XXXX" + bytes(data[4:]))
    data[4] = 99
    with pytest.raises(CorruptContainer, match="version"):
        decompress(bytes(data))


def test_corrupted_payload_never_silently_misdecodes():
    rng = random.Random(4)
    f = random_forest(rng, max_trees=6, d_range=(2, 4))
    data = compress(f, FAST)
    flipped = 0
    for pos in range(160, len(data), 7):
        mutated = bytearray(data)
        mutated[pos] ^= 0x5A
        flipped += 1
        try:
            g = decompress(bytes(mutated))
        except CorruptContainer:
            continue
        # A flip the decoder cannot detect must still decode to a VALID forest
        # (e.g. a different but well-formed value); it must never crash
        # with an unrelated error.
    assert flipped > 10


def test_random_corruption_fuzz_raises_only_corrupt_container():
    from rfzip.forest import validate_forest
    rng = random.Random(6)
    for trial in range(4):
        f = random_forest(rng, max_trees=6, d_range=(1, 4))
        data = compress(f, CompressOptions(seed=trial, k_max=3, restarts=2))
        for _ in range(150):
            mutated = bytearray(data)
            for _flip in range(rng.choice([1, 1, 3, 8])):
                mutated[rng.randrange(len(mutated))] ^= 1 << rng.randrange(8)
            try:
                validate_forest(decompress(bytes(mutated)))
            except CorruptContainer:
                pass  # detected; anything else would fail the test


def test_zero_variable_forest_roundtrip():
    schema = VariableSchema((), 4)
    f = Forest(schema=schema, task=CLASSIFICATION,
               trees=(Node(fit=1), Node(fit=0), Node(fit=1)), labels=("n", "y"))
    data = compress(f, FAST)
    assert forests_equal(f, decompress(data))
    assert predict_compressed(data, ()) == predict(f, ())


def test_wide_categorical_variable_roundtrip():
    cats = tuple(f"c{i}" for i in range(70))  # left-set masks beyond 64 bits
    schema = VariableSchema((Variable("c", "categorical", cats),), 9)
    mask = (1 << 69) | (1 << 33) | 1
    t = Node(fit=0.5, var=0, split=CategoricalSplit(mask),
             left=Node(fit=1.0), right=Node(fit=2.0))
    f = Forest(schema=schema, task=REGRESSION, trees=(t,))
    data = compress(f, FAST)
    assert forests_equal(f, decompress(data))
    assert predict_compressed(data, ("c69",)) == predict(f, ("c69",)) == 1.0
    assert predict_compressed(data, ("c2",)) == 2.0


def test_deterministic_bytes():
    rng = random.Random(21)
    f = random_forest(rng, max_trees=10)
    opts = CompressOptions(seed=77, k_max=6, restarts=3)
    assert compress(f, opts) == compress(f, opts)


def test_deterministic_across_processes_and_hash_seeds():
    # Containers must not depend on interpreter hash randomization.
    import hashlib
    import os
    import subprocess
    import sys
    script = (
        "import sys, random, hashlib; sys.path.insert(0, 'tests');"
        "from forestgen import random_forest;"
        "from rfzip.container import compress, CompressOptions;"
        "f = random_forest(random.Random(77), max_trees=12, d_range=(2, 5));"
        "data = compress(f, CompressOptions(seed=5, k_max=4, restarts=2));"
        "print(hashlib.sha256(data).hexdigest())"
    )
    digests = set()
    for hash_seed in ("1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=hash_seed)
        out = subprocess.run([sys.executable, "-c", script], env=env,
                             capture_output=True, text=True, check=True,
                             cwd=str(Path(__file__).resolve().parents[1]))
        digests.add(out.stdout.strip())
    assert len(digests) == 1, digests


def test_seed_changes_bytes_only_not_content():
    rng = random.Random(22)
    f = random_forest(rng, max_trees=10)
    d1 = compress(f, CompressOptions(seed=1, k_max=4, restarts=2))
    d2 = compress(f, CompressOptions(seed=2, k_max=4, restarts=2))
    assert forests_equal(decompress(d1), decompress(d2))


class TestFitCoder:
    def binary_forest(self):
        schema = VariableSchema((Variable("x", "numerical"),), 50)
        t = Node(fit=0, var=0, split=NumericSplit(1.5),
                 left=Node(fit=0), right=Node(fit=1))
        return Forest(schema=schema, task=CLASSIFICATION, trees=(t,) * 6,
                      labels=("n", "y"))

    def test_auto_picks_arithmetic_for_binary_fits(self):
        data = compress(self.binary_forest(), FAST)
        assert load(data).fits_arithmetic

    def test_auto_picks_huffman_for_multiclass(self, small_trained_classifier):
        data = compress(small_trained_classifier, FAST)
        assert not load(data).fits_arithmetic

    def test_forced_huffman(self):
        f = self.binary_forest()
        data = compress(f, CompressOptions(seed=0, k_max=4, restarts=2,
                                           fit_coder=HUFFMAN))
        assert not load(data).fits_arithmetic
        assert forests_equal(f, decompress(data))

    def test_arithmetic_requires_binary_classification(self, small_trained_regressor):
        with pytest.raises(ValueError):
            compress(small_trained_regressor,
                     CompressOptions(fit_coder=ARITHMETIC))

    def test_arithmetic_roundtrip_and_predict(self):
        f = self.binary_forest()
        data = compress(f, FAST)
        g = decompress(data)
        assert forests_equal(f, g)
        for x in [(1.0,), (2.0,), (None,)]:
            assert predict_compressed(data, x) == predict(f, x)
