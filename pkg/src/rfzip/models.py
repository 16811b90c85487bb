"""Conditional empirical distributions extracted from a forest.

Every internal node contributes one sample to the name model of its
(depth, father's variable) context and one to the split model of its
(variable, depth, father's variable) context; every node contributes one
sample to the fit model of its (depth, father's variable) context.  Split and
fit values are indexed through per-variable / global value tables so symbols
are small integers and reconstruction is bit-exact.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

from .entropy import EmpiricalDistribution
from .forest import (CATEGORICAL, CLASSIFICATION, CategoricalSplit, Forest,
                     NumericSplit, iter_nodes)

ROOT = -1  # father sentinel for depth-0 nodes

NAMES = "names"
SPLITS = "splits"
FITS = "fits"


@dataclass(frozen=True, order=True)
class Context:
    """Coding context: node depth plus the father's variable (ROOT at depth 0)."""

    depth: int
    father: int


@dataclass
class ConditionalModel:
    context: Context
    kind: str                       # NAMES, SPLITS or FITS
    var: int | None                 # the split variable (SPLITS only)
    counts: list[int]
    members: list[tuple[int, int]] = field(default_factory=list)  # (tree, preorder pos)

    @property
    def n(self) -> int:
        return len(self.members)

    @property
    def dist(self) -> EmpiricalDistribution:
        return EmpiricalDistribution(tuple(self.counts))


def _pattern(v: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", v))[0]


def _pattern_value(p: int) -> float:
    return struct.unpack("<d", struct.pack("<Q", p))[0]


def _sort_key(pattern: int) -> tuple:
    v = _pattern_value(pattern)
    return (math.isnan(v), v if not math.isnan(v) else 0.0, pattern)


@dataclass
class ValueTables:
    """Sorted distinct split values per variable, plus the distinct-fit table.

    Numerical split values and regression fits are stored as raw 64-bit
    patterns (deduplicated bitwise); categorical split values as left-set
    masks; classification fits as label indexes.
    """

    split_values: list[list[int]]            # per variable, sorted
    fit_values: list[int]                    # label indexes or 64-bit patterns
    _split_index: list[dict[int, int]] = field(default_factory=list)
    _fit_index: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self._split_index:
            self._split_index = [{v: i for i, v in enumerate(vals)}
                                 for vals in self.split_values]
        if not self._fit_index:
            self._fit_index = {v: i for i, v in enumerate(self.fit_values)}

    def split_symbol(self, var: int, split) -> int:
        key = _pattern(split.threshold) if isinstance(split, NumericSplit) else split.left_mask
        return self._split_index[var][key]

    def fit_symbol(self, task: str, fit) -> int:
        key = fit if task == CLASSIFICATION else _pattern(fit)
        return self._fit_index[key]

    def split_value(self, schema, var: int, symbol: int):
        raw = self.split_values[var][symbol]
        if schema.variables[var].kind == CATEGORICAL:
            return CategoricalSplit(raw)
        return NumericSplit(_pattern_value(raw))

    def fit_value(self, task: str, symbol: int):
        raw = self.fit_values[symbol]
        return raw if task == CLASSIFICATION else _pattern_value(raw)

    def split_alphabet(self, var: int) -> int:
        return len(self.split_values[var])

    @property
    def fit_alphabet(self) -> int:
        return len(self.fit_values)


def build_value_tables(forest: Forest) -> ValueTables:
    d = forest.schema.d
    split_sets: list[set[int]] = [set() for _ in range(d)]
    fit_set: set[int] = set()
    classification = forest.task == CLASSIFICATION
    for root in forest.trees:
        for node, _, _, _ in iter_nodes(root):
            fit_set.add(node.fit if classification else _pattern(node.fit))
            if not node.is_leaf:
                s = node.split
                key = _pattern(s.threshold) if isinstance(s, NumericSplit) else s.left_mask
                split_sets[node.var].add(key)
    split_values = []
    for var in range(d):
        if forest.schema.variables[var].kind == CATEGORICAL:
            split_values.append(sorted(split_sets[var]))
        else:
            split_values.append(sorted(split_sets[var], key=_sort_key))
    if classification:
        fit_values = sorted(fit_set)
    else:
        fit_values = sorted(fit_set, key=_sort_key)
    return ValueTables(split_values=split_values, fit_values=fit_values)


@dataclass
class ExtractedModels:
    names: dict[Context, ConditionalModel]
    splits: dict[int, dict[Context, ConditionalModel]]   # keyed by variable
    fits: dict[Context, ConditionalModel]
    tables: ValueTables


def extract_models(forest: Forest) -> ExtractedModels:
    """One pass per tree in preorder; model creation order is reproducible."""
    tables = build_value_tables(forest)
    d = forest.schema.d
    names: dict[Context, ConditionalModel] = {}
    splits: dict[int, dict[Context, ConditionalModel]] = {v: {} for v in range(d)}
    fits: dict[Context, ConditionalModel] = {}
    fit_b = tables.fit_alphabet
    for tree_id, root in enumerate(forest.trees):
        for node, depth, father, pos in iter_nodes(root):
            ctx = Context(depth, father)
            fm = fits.get(ctx)
            if fm is None:
                fm = fits[ctx] = ConditionalModel(ctx, FITS, None, [0] * fit_b)
            fm.counts[tables.fit_symbol(forest.task, node.fit)] += 1
            fm.members.append((tree_id, pos))
            if node.is_leaf:
                continue
            nm = names.get(ctx)
            if nm is None:
                nm = names[ctx] = ConditionalModel(ctx, NAMES, None, [0] * d)
            nm.counts[node.var] += 1
            nm.members.append((tree_id, pos))
            per_var = splits[node.var]
            sm = per_var.get(ctx)
            if sm is None:
                sm = per_var[ctx] = ConditionalModel(
                    ctx, SPLITS, node.var, [0] * tables.split_alphabet(node.var))
            sm.counts[tables.split_symbol(node.var, node.split)] += 1
            sm.members.append((tree_id, pos))
    return ExtractedModels(names=names, splits=splits, fits=fits, tables=tables)


def model_count_bound(d: int, t: int) -> tuple[int, int]:
    """Candidate-model bounds (names, splits) before clustering: d*T and d^2*T."""
    return d * t, d * d * t
