"""In-memory forest representation, interchange JSON I/O, and reference prediction.

The interchange format is ``rf-interchange/1`` (see docs/interchange.md).
All 64-bit floats (split thresholds and numeric fits) travel as 16-hex-digit
strings of their big-endian bit pattern so round trips are bit-exact.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

from .errors import DimensionError, InvariantError, SchemaError

INTERCHANGE_FORMAT = "rf-interchange/1"

NUMERICAL = "numerical"
CATEGORICAL = "categorical"
CLASSIFICATION = "classification"
REGRESSION = "regression"


def float_to_hex(v: float) -> str:
    """64-bit pattern of v as 16 lowercase hex digits (big-endian)."""
    return struct.pack(">d", v).hex()


def hex_to_float(s: str) -> float:
    if not isinstance(s, str) or len(s) != 16:
        raise SchemaError(f"expected a 16-hex-digit float pattern, got {s!r}")
    try:
        raw = bytes.fromhex(s)
    except ValueError:
        raise SchemaError(f"bad hex in float pattern {s!r}") from None
    return struct.unpack(">d", raw)[0]


def float_pattern(v: float) -> int:
    """The raw 64-bit pattern of v as an int (used for bit-exact identity)."""
    return struct.unpack("<Q", struct.pack("<d", v))[0]


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # NUMERICAL or CATEGORICAL
    categories: tuple[str, ...] = ()

    @property
    def n_categories(self) -> int:
        return len(self.categories)


@dataclass(frozen=True)
class VariableSchema:
    """Variable declarations plus the training-set size (informational)."""

    variables: tuple[Variable, ...]
    n_obs: int

    @property
    def d(self) -> int:
        return len(self.variables)

    def validate(self) -> None:
        if self.n_obs < 1:
            raise InvariantError("schema n_obs must be >= 1")
        names = set()
        for i, var in enumerate(self.variables):
            if not var.name:
                raise InvariantError(f"variable {i} has an empty name")
            if var.name in names:
                raise InvariantError(f"duplicate variable name {var.name!r}")
            names.add(var.name)
            if var.kind == CATEGORICAL:
                if var.n_categories < 2:
                    raise InvariantError(
                        f"categorical variable {var.name!r} needs >= 2 categories")
                if len(set(var.categories)) != var.n_categories:
                    raise InvariantError(
                        f"duplicate categories in variable {var.name!r}")
            elif var.kind != NUMERICAL:
                raise SchemaError(f"unknown variable kind {var.kind!r}")


@dataclass(frozen=True, slots=True)
class NumericSplit:
    threshold: float


@dataclass(frozen=True, slots=True)
class CategoricalSplit:
    """Bitmask over the variable's category index order; bit i set = category i goes left."""

    left_mask: int


@dataclass(slots=True)
class Node:
    """A tree node. Internal nodes carry var/split and both children; every node carries a fit.

    The fit is an int label index for classification forests and a float for
    regression forests.
    """

    fit: object
    var: int | None = None
    split: object = None
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True)
class Forest:
    schema: VariableSchema
    task: str  # CLASSIFICATION or REGRESSION
    trees: tuple[Node, ...]
    labels: tuple[str, ...] = ()  # fit label table, classification only
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def a(self) -> int:
        """Tree count."""
        return len(self.trees)

    @property
    def max_depth(self) -> int:
        """Maximal node depth over all trees (root depth = 0)."""
        best = 0
        for root in self.trees:
            stack = [(root, 0)]
            while stack:
                node, depth = stack.pop()
                if depth > best:
                    best = depth
                if not node.is_leaf:
                    stack.append((node.left, depth + 1))
                    stack.append((node.right, depth + 1))
        return best


def iter_nodes(root: Node):
    """Yield (node, depth, father_var, preorder_position) in preorder."""
    stack = [(root, 0, -1)]
    pos = 0
    while stack:
        node, depth, father = stack.pop()
        yield node, depth, father, pos
        pos += 1
        if not node.is_leaf:
            # Right pushed first so left pops first (preorder).
            stack.append((node.right, depth + 1, node.var))
            stack.append((node.left, depth + 1, node.var))


def count_nodes(root: Node) -> tuple[int, int]:
    """(internal, leaf) node counts."""
    internal = leaves = 0
    for node, _, _, _ in iter_nodes(root):
        if node.is_leaf:
            leaves += 1
        else:
            internal += 1
    return internal, leaves


def validate_forest(forest: Forest) -> None:
    """Check every structural invariant; raises with the offending node path."""
    forest.schema.validate()
    if forest.task not in (CLASSIFICATION, REGRESSION):
        raise SchemaError(f"unknown task {forest.task!r}")
    if forest.a < 1:
        raise InvariantError("a forest needs at least one tree")
    if forest.task == CLASSIFICATION:
        if not forest.labels:
            raise InvariantError("classification forest without a label table")
        if len(set(forest.labels)) != len(forest.labels):
            raise InvariantError("duplicate labels in the label table")
    elif forest.labels:
        raise InvariantError("regression forest must not carry a label table")

    d = forest.schema.d
    for t, root in enumerate(forest.trees):
        stack = [(root, f"trees[{t}]")]
        while stack:
            node, path = stack.pop()
            _validate_fit(forest, node.fit, path)
            if node.is_leaf:
                if node.right is not None or node.var is not None or node.split is not None:
                    raise InvariantError(f"{path}: leaf carries internal-node fields")
                continue
            if node.right is None:
                raise InvariantError(f"{path}: internal node with one child")
            if node.var is None or not (0 <= node.var < d):
                raise InvariantError(f"{path}: split variable index {node.var} out of range")
            var = forest.schema.variables[node.var]
            split = node.split
            if isinstance(split, NumericSplit):
                if var.kind != NUMERICAL:
                    raise InvariantError(
                        f"{path}: numerical split on categorical variable {var.name!r}")
                if not math.isfinite(split.threshold):
                    raise InvariantError(f"{path}: non-finite split threshold")
            elif isinstance(split, CategoricalSplit):
                if var.kind != CATEGORICAL:
                    raise InvariantError(
                        f"{path}: categorical split on numerical variable {var.name!r}")
                full = (1 << var.n_categories) - 1
                if split.left_mask <= 0 or split.left_mask >= full:
                    raise InvariantError(
                        f"{path}: categorical left set must be non-empty and proper")
            else:
                raise SchemaError(f"{path}: internal node without a split")
            stack.append((node.left, path + ".left"))
            stack.append((node.right, path + ".right"))


def _validate_fit(forest: Forest, fit, path: str) -> None:
    if forest.task == CLASSIFICATION:
        if not isinstance(fit, int) or isinstance(fit, bool):
            raise InvariantError(f"{path}: classification fit must be a label index")
        if not (0 <= fit < len(forest.labels)):
            raise InvariantError(f"{path}: fit label index {fit} out of range")
    else:
        if not isinstance(fit, float):
            raise InvariantError(f"{path}: regression fit must be a float")
        if not math.isfinite(fit):
            raise InvariantError(f"{path}: regression fit must be finite")


# ---------------------------------------------------------------------------
# Interchange JSON
# ---------------------------------------------------------------------------

def parse_forest(document: bytes | str) -> Forest:
    """Parse and fully validate an rf-interchange/1 document.

    Rejects rather than repairs: any missing/unknown field or invariant
    violation raises SchemaError / InvariantError with the node path.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")
    allowed = {"format", "task", "schema", "trees", "meta"}
    extra = set(doc) - allowed
    if extra:
        raise SchemaError(f"unknown top-level keys {sorted(extra)}")
    if doc.get("format") != INTERCHANGE_FORMAT:
        raise SchemaError(f"format must be {INTERCHANGE_FORMAT!r}")
    task = doc.get("task")
    if task not in (CLASSIFICATION, REGRESSION):
        raise SchemaError(f"task must be classification or regression, got {task!r}")

    schema, labels = _parse_schema(doc.get("schema"), task)
    trees_json = doc.get("trees")
    if not isinstance(trees_json, list) or not trees_json:
        raise SchemaError("trees must be a non-empty array")
    trees = tuple(
        _parse_node(node_json, task, f"trees[{t}]")
        for t, node_json in enumerate(trees_json)
    )
    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise SchemaError("meta must be an object")
    forest = Forest(schema=schema, task=task, trees=trees, labels=labels, meta=meta)
    validate_forest(forest)
    return forest


def _parse_schema(schema_json, task: str) -> tuple[VariableSchema, tuple[str, ...]]:
    if not isinstance(schema_json, dict):
        raise SchemaError("schema must be an object")
    allowed = {"n_obs", "variables", "labels"}
    extra = set(schema_json) - allowed
    if extra:
        raise SchemaError(f"unknown schema keys {sorted(extra)}")
    n_obs = schema_json.get("n_obs")
    if not isinstance(n_obs, int) or isinstance(n_obs, bool):
        raise SchemaError("schema n_obs must be an integer")
    vars_json = schema_json.get("variables")
    if not isinstance(vars_json, list):
        raise SchemaError("schema variables must be an array")
    variables = []
    for i, vj in enumerate(vars_json):
        if not isinstance(vj, dict):
            raise SchemaError(f"variables[{i}] must be an object")
        name = vj.get("name")
        kind = vj.get("kind")
        if not isinstance(name, str):
            raise SchemaError(f"variables[{i}] missing name")
        if kind == CATEGORICAL:
            cats = vj.get("categories")
            if not isinstance(cats, list) or not all(isinstance(c, str) for c in cats):
                raise SchemaError(f"variables[{i}] needs a categories array of strings")
            variables.append(Variable(name, CATEGORICAL, tuple(cats)))
        elif kind == NUMERICAL:
            if "categories" in vj:
                raise SchemaError(f"variables[{i}] is numerical but lists categories")
            variables.append(Variable(name, NUMERICAL))
        else:
            raise SchemaError(f"variables[{i}] has unknown kind {kind!r}")
    labels_json = schema_json.get("labels")
    if task == CLASSIFICATION:
        if not isinstance(labels_json, list) or not labels_json \
                or not all(isinstance(x, str) for x in labels_json):
            raise SchemaError("classification schema needs a labels array of strings")
        labels = tuple(labels_json)
    else:
        if labels_json is not None:
            raise SchemaError("regression schema must not carry labels")
        labels = ()
    return VariableSchema(tuple(variables), n_obs), labels


def _parse_fit(fit_json, task: str, path: str):
    if not isinstance(fit_json, dict):
        raise SchemaError(f"{path}: fit must be an object")
    if task == CLASSIFICATION:
        if set(fit_json) != {"label"}:
            raise SchemaError(f"{path}: classification fit must be {{label}}")
        label = fit_json["label"]
        if not isinstance(label, int) or isinstance(label, bool):
            raise SchemaError(f"{path}: fit label must be an integer index")
        return label
    if set(fit_json) != {"value"}:
        raise SchemaError(f"{path}: regression fit must be {{value}}")
    return hex_to_float(fit_json["value"])


def _parse_node(node_json, task: str, root_path: str) -> Node:
    # Iterative conversion; children are attached after their dicts are expanded.
    if not isinstance(node_json, dict):
        raise SchemaError(f"{root_path}: node must be an object")
    root = Node(fit=None)
    stack = [(node_json, root, root_path)]
    while stack:
        nj, node, path = stack.pop()
        if not isinstance(nj, dict):
            raise SchemaError(f"{path}: node must be an object")
        keys = set(nj)
        if keys == {"fit"}:
            node.fit = _parse_fit(nj["fit"], task, path)
            continue
        if keys != {"var", "split", "fit", "left", "right"}:
            raise SchemaError(
                f"{path}: node keys must be {{fit}} or {{var,split,fit,left,right}}, got {sorted(keys)}")
        var = nj["var"]
        if not isinstance(var, int) or isinstance(var, bool):
            raise SchemaError(f"{path}: var must be an integer index")
        node.var = var
        node.split = _parse_split(nj["split"], path)
        node.fit = _parse_fit(nj["fit"], task, path)
        node.left = Node(fit=None)
        node.right = Node(fit=None)
        stack.append((nj["left"], node.left, path + ".left"))
        stack.append((nj["right"], node.right, path + ".right"))
    return root


def _parse_split(split_json, path: str):
    if not isinstance(split_json, dict):
        raise SchemaError(f"{path}: split must be an object")
    if set(split_json) == {"threshold"}:
        return NumericSplit(hex_to_float(split_json["threshold"]))
    if set(split_json) == {"left_set"}:
        mask_hex = split_json["left_set"]
        if not isinstance(mask_hex, str) or not mask_hex:
            raise SchemaError(f"{path}: left_set must be a hex string")
        try:
            mask = int(mask_hex, 16)
        except ValueError:
            raise SchemaError(f"{path}: bad left_set hex {mask_hex!r}") from None
        return CategoricalSplit(mask)
    raise SchemaError(f"{path}: split must be {{threshold}} or {{left_set}}")


def serialize_forest(forest: Forest) -> str:
    """Emit the rf-interchange/1 document; parse_forest(serialize_forest(f)) == f."""
    validate_forest(forest)
    schema_json: dict = {
        "n_obs": forest.schema.n_obs,
        "variables": [
            {"name": v.name, "kind": v.kind, "categories": list(v.categories)}
            if v.kind == CATEGORICAL else {"name": v.name, "kind": v.kind}
            for v in forest.schema.variables
        ],
    }
    if forest.task == CLASSIFICATION:
        schema_json["labels"] = list(forest.labels)
    doc = {
        "format": INTERCHANGE_FORMAT,
        "task": forest.task,
        "schema": schema_json,
        "trees": [_node_to_json(root, forest.task) for root in forest.trees],
    }
    if forest.meta:
        doc["meta"] = forest.meta
    return json.dumps(doc, separators=(",", ":"))


def _fit_to_json(fit, task: str):
    if task == CLASSIFICATION:
        return {"label": fit}
    return {"value": float_to_hex(fit)}


def _node_to_json(root: Node, task: str) -> dict:
    out_root: dict = {}
    stack = [(root, out_root)]
    while stack:
        node, out = stack.pop()
        if node.is_leaf:
            out["fit"] = _fit_to_json(node.fit, task)
            continue
        out["var"] = node.var
        if isinstance(node.split, NumericSplit):
            out["split"] = {"threshold": float_to_hex(node.split.threshold)}
        else:
            out["split"] = {"left_set": format(node.split.left_mask, "x")}
        out["fit"] = _fit_to_json(node.fit, task)
        out["left"] = {}
        out["right"] = {}
        stack.append((node.left, out["left"]))
        stack.append((node.right, out["right"]))
    return out_root


def forests_equal(a: Forest, b: Forest) -> bool:
    """Structural identity including exact 64-bit fit/threshold patterns."""
    if a.schema != b.schema or a.task != b.task or a.labels != b.labels or a.a != b.a:
        return False
    for ra, rb in zip(a.trees, b.trees):
        stack = [(ra, rb)]
        while stack:
            na, nb = stack.pop()
            if na.is_leaf != nb.is_leaf or na.var != nb.var:
                return False
            if a.task == CLASSIFICATION:
                if na.fit != nb.fit:
                    return False
            elif float_pattern(na.fit) != float_pattern(nb.fit):
                return False
            if not na.is_leaf:
                sa, sb = na.split, nb.split
                if type(sa) is not type(sb):
                    return False
                if isinstance(sa, NumericSplit):
                    if float_pattern(sa.threshold) != float_pattern(sb.threshold):
                        return False
                elif sa.left_mask != sb.left_mask:
                    return False
                stack.append((na.left, nb.left))
                stack.append((na.right, nb.right))
    return True


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def encode_observation(schema: VariableSchema, x) -> list:
    """Normalize an observation to per-variable values (None = missing).

    Numerical variables take floats (NaN counts as missing); categorical
    variables take category labels, mapped to their index.
    """
    values = list(x)
    if len(values) != schema.d:
        raise DimensionError(f"observation has {len(values)} values, schema has {schema.d}")
    row = []
    for var, val in zip(schema.variables, values):
        if val is None:
            row.append(None)
        elif var.kind == NUMERICAL:
            fv = float(val)
            row.append(None if math.isnan(fv) else fv)
        else:
            if not isinstance(val, str):
                raise TypeError(f"variable {var.name!r} expects a category label, got {val!r}")
            try:
                row.append(var.categories.index(val))
            except ValueError:
                raise TypeError(
                    f"{val!r} is not a known category of variable {var.name!r}") from None
    return row


def tree_fit(root: Node, row: list):
    """Descend one tree; a missing value stops descent at the current node's fit."""
    node = root
    while not node.is_leaf:
        val = row[node.var]
        if val is None:
            return node.fit
        if isinstance(node.split, NumericSplit):
            go_left = val < node.split.threshold
        else:
            go_left = (node.split.left_mask >> val) & 1 == 1
        node = node.left if go_left else node.right
    return node.fit


def aggregate_fits(task: str, fits: list):
    """Majority vote (ties to the lowest label index) or arithmetic mean."""
    if task == CLASSIFICATION:
        counts: dict[int, int] = {}
        for f in fits:
            counts[f] = counts.get(f, 0) + 1
        best_label = None
        best_count = -1
        for label in sorted(counts):
            if counts[label] > best_count:
                best_label, best_count = label, counts[label]
        return best_label
    return math.fsum(fits) / len(fits)


def predict(forest: Forest, x):
    """Predict one observation; returns a label index or a float."""
    row = encode_observation(forest.schema, x)
    fits = [tree_fit(root, row) for root in forest.trees]
    return aggregate_fits(forest.task, fits)
