"""Desk-scale CART random-forest trainer.

Trees grow greedily on bootstrap resamples with a random variable subset per
split (variance reduction for regression, Gini for classification), stop at
min_leaf or purity, and store a fit at every node.  Tree k is reproducible in
isolation because its RNG is derived from (seed, k).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .forest import (CATEGORICAL, CLASSIFICATION, NUMERICAL, REGRESSION,
                     CategoricalSplit, Forest, Node, NumericSplit, Variable,
                     VariableSchema)

_MAX_CAT_SUBSETS = 1 << 12  # cap on enumerated categorical left-sets per node


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int
    mtry: int | None = None     # default: ceil(sqrt(d)) classification, ceil(d/3) regression
    min_leaf: int = 5
    bootstrap: bool = True
    seed: int = 0
    task: str | None = None     # inferred from targets when None


@dataclass
class Dataset:
    schema: VariableSchema
    columns: list[np.ndarray]   # float64 for numerical, int codes for categorical
    targets: np.ndarray         # int codes (classification) or float64 (regression)
    labels: tuple[str, ...]     # classification only
    task: str

    @property
    def n(self) -> int:
        return len(self.targets)

    def row(self, i: int) -> tuple:
        out = []
        for var, col in zip(self.schema.variables, self.columns):
            if var.kind == CATEGORICAL:
                out.append(var.categories[int(col[i])])
            else:
                out.append(float(col[i]))
        return tuple(out)


def load_csv(source, target: str | None = None, kinds: dict[str, str] | None = None,
             task: str | None = None) -> Dataset:
    """Read an RFC 4180 CSV with a header row; the target defaults to the last column.

    Column kinds come from `kinds` when given, otherwise a column is numerical
    iff every value parses as a float.  The task is inferred from the target
    column the same way unless forced.
    """
    if isinstance(source, (str, bytes)):
        text = source.decode("utf-8") if isinstance(source, bytes) else source
        rows = list(csv.reader(io.StringIO(text)))
    else:
        rows = list(csv.reader(source))
    if len(rows) < 2:
        raise DataError("CSV needs a header row and at least one data row")
    header, data = rows[0], rows[1:]
    if target is None:
        target = header[-1]
    if target not in header:
        raise DataError(f"target column {target!r} not in header")
    t_idx = header.index(target)
    widths = {len(r) for r in data}
    if widths != {len(header)}:
        raise DataError("ragged CSV rows")

    def is_numeric(values):
        for v in values:
            try:
                float(v)
            except ValueError:
                return False
        return True

    feat_names = [h for i, h in enumerate(header) if i != t_idx]
    variables = []
    columns: list[np.ndarray] = []
    for i, name in enumerate(header):
        if i == t_idx:
            continue
        raw = [r[i] for r in data]
        if any(v == "" for v in raw):
            raise DataError(f"missing value in training column {name!r}")
        kind = (kinds or {}).get(name)
        if kind is None:
            kind = NUMERICAL if is_numeric(raw) else CATEGORICAL
        if kind == NUMERICAL:
            variables.append(Variable(name, NUMERICAL))
            columns.append(np.array([float(v) for v in raw], dtype=np.float64))
        else:
            cats = tuple(sorted(set(raw)))
            variables.append(Variable(name, CATEGORICAL, cats))
            idx = {c: j for j, c in enumerate(cats)}
            columns.append(np.array([idx[v] for v in raw], dtype=np.int64))

    t_raw = [r[t_idx] for r in data]
    if any(v == "" for v in t_raw):
        raise DataError("missing value in the target column")
    if task is None:
        task = REGRESSION if is_numeric(t_raw) else CLASSIFICATION
    if task == REGRESSION:
        targets = np.array([float(v) for v in t_raw], dtype=np.float64)
        labels: tuple[str, ...] = ()
    else:
        labels = tuple(sorted(set(t_raw)))
        idx = {c: j for j, c in enumerate(labels)}
        targets = np.array([idx[v] for v in t_raw], dtype=np.int64)
    schema = VariableSchema(tuple(variables), len(data))
    return Dataset(schema=schema, columns=columns, targets=targets, labels=labels, task=task)


def dataset_from_arrays(variables, columns, targets, labels=(), task=REGRESSION) -> Dataset:
    cols = [np.asarray(c) for c in columns]
    n = len(targets)
    if n == 0 or any(len(c) != n for c in cols):
        raise DataError("empty dataset or mismatched column lengths")
    schema = VariableSchema(tuple(variables), n)
    return Dataset(schema=schema, columns=cols,
                   targets=np.asarray(targets), labels=tuple(labels), task=task)


def _node_fit(task: str, y: np.ndarray, n_labels: int):
    if task == CLASSIFICATION:
        counts = np.bincount(y, minlength=n_labels)
        return int(np.argmax(counts))  # ties break to the lowest label index
    return float(np.mean(y))


def _is_pure(task: str, y: np.ndarray) -> bool:
    if task == CLASSIFICATION:
        return bool((y == y[0]).all())
    return bool((y == y[0]).all())


def _impurity_gain_numeric(values, y, task, n_labels, min_leaf):
    """Best (gain, threshold) for one numerical column, or None.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values; children smaller than min_leaf are not considered.
    """
    order = np.argsort(values, kind="stable")
    v = values[order]
    ys = y[order]
    n = len(v)
    distinct = np.nonzero(v[1:] > v[:-1])[0] + 1  # candidate cut positions
    if len(distinct) == 0:
        return None
    cuts = distinct[(distinct >= min_leaf) & (distinct <= n - min_leaf)]
    if len(cuts) == 0:
        return None
    if task == REGRESSION:
        csum = np.cumsum(ys)
        csum2 = np.cumsum(ys * ys)
        total = csum[-1]
        total2 = csum2[-1]
        nl = cuts.astype(np.float64)
        nr = n - nl
        sse_l = csum2[cuts - 1] - csum[cuts - 1] ** 2 / nl
        sse_r = (total2 - csum2[cuts - 1]) - (total - csum[cuts - 1]) ** 2 / nr
        parent = total2 - total ** 2 / n
        gains = parent - (sse_l + sse_r)
    else:
        onehot = np.zeros((n, n_labels))
        onehot[np.arange(n), ys] = 1.0
        cum = np.cumsum(onehot, axis=0)
        totals = cum[-1]
        nl = cuts.astype(np.float64)
        nr = n - nl
        left = cum[cuts - 1]
        right = totals[None, :] - left
        gini_l = nl - (left ** 2).sum(axis=1) / nl
        gini_r = nr - (right ** 2).sum(axis=1) / nr
        parent = n - (totals ** 2).sum() / n
        gains = parent - (gini_l + gini_r)
    best = int(np.argmax(gains))
    if gains[best] <= 1e-12:
        return None
    cut = int(cuts[best])
    threshold = (v[cut - 1] + v[cut]) / 2.0
    if not (v[cut - 1] < threshold <= v[cut]):
        return None  # adjacent floats can swallow the midpoint
    return float(gains[best]), threshold


def _partition_impurity(y_left, y_right, task, n_labels, parent_impurity):
    nl, nr = len(y_left), len(y_right)
    if task == REGRESSION:
        il = y_left.var() * nl
        ir = y_right.var() * nr
    else:
        cl = np.bincount(y_left, minlength=n_labels).astype(float)
        cr = np.bincount(y_right, minlength=n_labels).astype(float)
        il = nl - (cl ** 2).sum() / nl
        ir = nr - (cr ** 2).sum() / nr
    return parent_impurity - (il + ir)


def mask_selector(mask: int, codes: np.ndarray, n_categories: int) -> np.ndarray:
    """Boolean left-side selector; safe for masks wider than 64 bits."""
    lut = np.zeros(n_categories, dtype=bool)
    m = mask
    c = 0
    while m:
        if m & 1:
            lut[c] = True
        m >>= 1
        c += 1
    return lut[codes]


def _impurity_gain_categorical(codes, y, n_categories, task, n_labels, min_leaf):
    """Greedy one-vs-rest left-set growth; returns (gain, left_mask) or None."""
    present = np.unique(codes)
    if len(present) < 2:
        return None
    if task == REGRESSION:
        parent = y.var() * len(y)
    else:
        c = np.bincount(y, minlength=n_labels).astype(float)
        parent = len(y) - (c ** 2).sum() / len(y)

    def eval_mask(mask):
        left_sel = mask_selector(mask, codes, n_categories)
        nl = int(left_sel.sum())
        if nl < min_leaf or len(y) - nl < min_leaf:
            return None
        return _partition_impurity(y[left_sel], y[~left_sel], task, n_labels, parent)

    evaluated = 0
    best_gain, best_mask = 0.0, None
    current = 0
    remaining = list(int(c) for c in present)
    while remaining and evaluated < _MAX_CAT_SUBSETS:
        step_gain, step_mask, step_cat = None, None, None
        for cat in remaining:
            mask = current | (1 << cat)
            if mask == current:
                continue
            evaluated += 1
            g = eval_mask(mask)
            if g is not None and (step_gain is None or g > step_gain):
                step_gain, step_mask, step_cat = g, mask, cat
            if evaluated >= _MAX_CAT_SUBSETS:
                break
        if step_mask is None:
            # No feasible/improving extension from this prefix; grow through the
            # least-bad category once to escape min_leaf plateaus.
            if current == 0 and remaining:
                current |= 1 << remaining[0]
                remaining.pop(0)
                continue
            break
        current = step_mask
        remaining.remove(step_cat)
        if step_gain > best_gain + 1e-12:
            best_gain, best_mask = step_gain, step_mask
    if best_mask is None or best_gain <= 1e-12:
        return None
    full = (1 << n_categories) - 1
    if best_mask <= 0 or best_mask >= full:
        return None
    return best_gain, best_mask


def _grow_tree(ds: Dataset, cfg: TrainConfig, rng: np.random.Generator) -> Node:
    n = ds.n
    if cfg.bootstrap:
        idx = rng.integers(0, n, size=n)
    else:
        idx = np.arange(n)
    n_labels = len(ds.labels)
    d = ds.schema.d
    mtry = cfg.mtry
    if mtry is None:
        mtry = (max(1, int(np.ceil(np.sqrt(d)))) if ds.task == CLASSIFICATION
                else max(1, int(np.ceil(d / 3))))
    mtry = min(mtry, d) if d else 0

    root = Node(fit=None)
    stack = [(idx, root)]
    while stack:
        node_idx, node = stack.pop()
        y = ds.targets[node_idx]
        node.fit = _node_fit(ds.task, y, n_labels)
        if len(node_idx) < 2 * cfg.min_leaf or _is_pure(ds.task, y) or mtry == 0:
            continue
        candidates = rng.choice(d, size=mtry, replace=False)
        best = None  # (gain, var, split_obj)
        for var in candidates:
            var = int(var)
            col = ds.columns[var][node_idx]
            if ds.schema.variables[var].kind == NUMERICAL:
                found = _impurity_gain_numeric(col, y, ds.task, n_labels, cfg.min_leaf)
                if found is not None:
                    gain, threshold = found
                    if best is None or gain > best[0] + 1e-12:
                        best = (gain, var, NumericSplit(threshold))
            else:
                ncat = ds.schema.variables[var].n_categories
                found = _impurity_gain_categorical(col, y, ncat, ds.task,
                                                   n_labels, cfg.min_leaf)
                if found is not None:
                    gain, mask = found
                    if best is None or gain > best[0] + 1e-12:
                        best = (gain, var, CategoricalSplit(mask))
        if best is None:
            continue
        _gain, var, split = best
        col = ds.columns[var][node_idx]
        if isinstance(split, NumericSplit):
            left_sel = col < split.threshold
        else:
            left_sel = mask_selector(split.left_mask, col,
                                     ds.schema.variables[var].n_categories)
        left_idx = node_idx[left_sel]
        right_idx = node_idx[~left_sel]
        if len(left_idx) == 0 or len(right_idx) == 0:
            continue
        node.var = var
        node.split = split
        node.left = Node(fit=None)
        node.right = Node(fit=None)
        stack.append((right_idx, node.right))
        stack.append((left_idx, node.left))
    return root


def tree_rng(seed: int, tree_id: int) -> np.random.Generator:
    """Per-tree generator derived from (seed, tree_id); trees are exchangeable."""
    return np.random.default_rng([seed, tree_id])


def train(ds: Dataset, cfg: TrainConfig) -> Forest:
    if ds.n == 0:
        raise DataError("empty dataset")
    if cfg.n_trees < 1:
        raise DataError("n_trees must be >= 1")
    if cfg.min_leaf < 1:
        raise DataError("min_leaf must be >= 1")
    if cfg.mtry is not None and not (1 <= cfg.mtry <= ds.schema.d):
        raise DataError(f"mtry must be in 1..{ds.schema.d}")
    task = cfg.task or ds.task
    if task != ds.task:
        raise DataError(f"dataset holds {ds.task} targets, config asks for {task}")
    trees = tuple(_grow_tree(ds, cfg, tree_rng(cfg.seed, t)) for t in range(cfg.n_trees))
    return Forest(schema=ds.schema, task=task, trees=trees, labels=ds.labels)
