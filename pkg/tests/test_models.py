import random

from forestgen import random_forest
from rfzip.container import CompressOptions, compress, decompress
from rfzip.forest import (Forest, Node, NumericSplit, Variable, VariableSchema,
                          count_nodes)
from rfzip.models import (ROOT, Context, build_value_tables, extract_models,
                          model_count_bound)


def two_identical_trees():
    schema = VariableSchema((Variable("v0", "numerical"),
                             Variable("v1", "numerical")), 20)
    def tree():
        return Node(fit=0, var=0, split=NumericSplit(3.5),
                    left=Node(fit=0), right=Node(fit=1))
    return Forest(schema=schema, task="classification",
                  trees=(tree(), tree()), labels=("x", "y"))


def test_two_tree_example_by_hand():
    f = two_identical_trees()
    ex = extract_models(f)
    root_ctx = Context(0, ROOT)
    # Name model at (0, ROOT): var0 twice.
    assert set(ex.names) == {root_ctx}
    assert ex.names[root_ctx].counts == [2, 0]
    assert ex.names[root_ctx].n == 2
    # One split model: var0 at (0, ROOT) with one distinct value, count 2.
    assert set(ex.splits[0]) == {root_ctx}
    assert ex.splits[0][root_ctx].counts == [2]
    assert ex.splits[1] == {}
    # Fit models at depth 0 (roots) and depth 1 (leaves under var0).
    assert set(ex.fits) == {root_ctx, Context(1, 0)}
    assert ex.fits[root_ctx].n == 2
    assert ex.fits[Context(1, 0)].n == 4
    # Fit alphabet = the two labels in use.
    assert ex.tables.fit_values == [0, 1]
    assert ex.fits[Context(1, 0)].counts == [2, 2]


def test_single_leaf_forest():
    schema = VariableSchema((Variable("x", "numerical"),), 5)
    f = Forest(schema=schema, task="regression", trees=(Node(fit=1.25),))
    ex = extract_models(f)
    assert ex.names == {}
    assert all(not m for m in ex.splits.values())
    assert set(ex.fits) == {Context(0, ROOT)}
    assert ex.fits[Context(0, ROOT)].n == 1
    assert len(ex.tables.fit_values) == 1


def test_sample_conservation():
    rng = random.Random(2)
    for _ in range(25):
        f = random_forest(rng)
        ex = extract_models(f)
        internal = sum(count_nodes(t)[0] for t in f.trees)
        total = sum(sum(count_nodes(t)) for t in f.trees)
        assert sum(m.n for m in ex.names.values()) == internal
        assert sum(m.n for per in ex.splits.values() for m in per.values()) == internal
        assert sum(m.n for m in ex.fits.values()) == total
        # Every sample accounted for exactly once per family.
        fit_members = [mm for m in ex.fits.values() for mm in m.members]
        assert len(fit_members) == len(set(fit_members)) == total


def test_model_count_bound_values():
    assert model_count_bound(4, 10) == (40, 160)
    assert model_count_bound(1, 7) == (7, 7)


def test_occupied_contexts_within_bounds():
    rng = random.Random(31)
    for _ in range(20):
        f = random_forest(rng)
        ex = extract_models(f)
        d = f.schema.d
        t = f.max_depth
        name_bound, split_bound = model_count_bound(max(d, 1), max(t, 1))
        assert len(ex.names) <= name_bound + 1
        split_contexts = sum(len(per) for per in ex.splits.values())
        assert split_contexts <= split_bound + d


def test_single_variable_split_contexts_bounded_by_depth():
    rng = random.Random(77)
    f = random_forest(rng, d_range=(1, 1))
    ex = extract_models(f)
    t = f.max_depth
    assert sum(len(per) for per in ex.splits.values()) <= t + 1


def test_members_are_preorder_and_deterministic():
    f = two_identical_trees()
    ex1 = extract_models(f)
    ex2 = extract_models(f)
    assert ex1.names[Context(0, ROOT)].members == [(0, 0), (1, 0)]
    assert ex1.fits[Context(1, 0)].members == [(0, 1), (0, 2), (1, 1), (1, 2)]
    for ctx in ex1.fits:
        assert ex1.fits[ctx].members == ex2.fits[ctx].members


def test_reextraction_after_roundtrip_is_identical():
    rng = random.Random(12)
    f = random_forest(rng)
    ex = extract_models(f)
    g = decompress(compress(f, CompressOptions(seed=1, k_max=4, restarts=2)))
    ex2 = extract_models(g)
    assert set(ex.names) == set(ex2.names)
    for ctx in ex.names:
        assert ex.names[ctx].counts == ex2.names[ctx].counts
        assert ex.names[ctx].members == ex2.names[ctx].members
    assert ex.tables.split_values == ex2.tables.split_values
    assert ex.tables.fit_values == ex2.tables.fit_values


def test_value_tables_sorted_and_deduplicated():
    schema = VariableSchema((Variable("x", "numerical"),), 9)
    def t(thr, fit):
        return Node(fit=fit, var=0, split=NumericSplit(thr),
                    left=Node(fit=fit), right=Node(fit=fit))
    f = Forest(schema=schema, task="regression",
               trees=(t(5.0, 1.5), t(-2.0, 1.5), t(5.0, 0.5)))
    tables = build_value_tables(f)
    import struct
    vals = [struct.unpack("<d", struct.pack("<Q", p))[0]
            for p in tables.split_values[0]]
    assert vals == [-2.0, 5.0]
    assert len(tables.fit_values) == 2
