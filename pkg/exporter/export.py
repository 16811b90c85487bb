#!/usr/bin/env python3
"""Convert pickled scikit-learn random-forest models to rf-interchange/1 JSON.

Supported inputs: RandomForestClassifier / RandomForestRegressor (and the
ExtraTrees variants) pickled with pickle or joblib, single-output only.

scikit-learn descends left on `x <= threshold` while the interchange format
uses strict `x < threshold`; thresholds are copied bit-exactly and the caveat
is recorded under meta.source_split_rule, so predictions can differ only for
observations exactly equal to a threshold.

Usage: export.py <model-file> -o forest.json
"""
from __future__ import annotations

import argparse
import json
import pickle
import struct
import sys

import numpy as np


class UnsupportedModel(Exception):
    """The loaded object is not a supported bagged-tree ensemble."""


def _float_hex(v: float) -> str:
    return struct.pack(">d", float(v)).hex()


def load_model(path: str):
    try:
        with open(path, "rb") as fh:
            return pickle.load(fh)
    except Exception:
        pass
    try:
        import joblib
        return joblib.load(path)
    except Exception as exc:
        raise UnsupportedModel(f"cannot unpickle {path!r}: {exc}") from None


def _check_supported(model) -> str:
    name = type(model).__name__
    if not hasattr(model, "estimators_"):
        raise UnsupportedModel(
            f"{name} has no estimators_ attribute (not a bagged ensemble)")
    estimators = model.estimators_
    if not isinstance(estimators, list) or not estimators:
        # Boosted ensembles keep estimators_ as a stage grid, not a flat bag.
        raise UnsupportedModel(
            f"{name}.estimators_ is {type(estimators).__name__}, not a flat "
            f"list of trees (boosted ensembles are unsupported)")
    if not hasattr(estimators[0], "tree_"):
        raise UnsupportedModel(f"{name}.estimators_[0] has no tree_ attribute")
    if getattr(model, "n_outputs_", 1) != 1:
        raise UnsupportedModel(
            f"n_outputs_={model.n_outputs_}: multi-output ensembles are not supported")
    if hasattr(model, "classes_"):
        if getattr(model, "n_classes_", 2) < 2:
            raise UnsupportedModel("classes_: fewer than two classes")
        return "classification"
    return "regression"


def _node_json(tree, node: int, task: str) -> dict:
    left = int(tree.children_left[node])
    right = int(tree.children_right[node])
    value = tree.value[node][0]
    if task == "classification":
        fit = {"label": int(np.argmax(value))}
    else:
        fit = {"value": _float_hex(value[0])}
    if left == -1:
        return {"fit": fit}
    return {
        "var": int(tree.feature[node]),
        "split": {"threshold": _float_hex(tree.threshold[node])},
        "fit": fit,
        "left": None,   # filled by the caller
        "right": None,
        "_children": (left, right),
    }


def _tree_json(estimator, task: str) -> dict:
    tree = estimator.tree_
    root = _node_json(tree, 0, task)
    stack = [(root, 0)]
    while stack:
        out, node = stack.pop()
        if "_children" not in out:
            continue
        left, right = out.pop("_children")
        out["left"] = _node_json(tree, left, task)
        out["right"] = _node_json(tree, right, task)
        stack.append((out["left"], left))
        stack.append((out["right"], right))
    return root


def export_model(model) -> dict:
    """Map a fitted ensemble to an rf-interchange/1 document."""
    task = _check_supported(model)
    n_features = int(model.n_features_in_)
    names = list(getattr(model, "feature_names_in_", None)
                 if getattr(model, "feature_names_in_", None) is not None
                 else (f"x{i}" for i in range(n_features)))
    # Bootstrap draws are the training size; the root's sample count records it.
    n_obs = int(model.estimators_[0].tree_.n_node_samples[0])
    schema = {
        "n_obs": max(n_obs, 1),
        "variables": [{"name": str(n), "kind": "numerical"} for n in names],
    }
    if task == "classification":
        schema["labels"] = [str(c) for c in model.classes_]
    return {
        "format": "rf-interchange/1",
        "task": task,
        "schema": schema,
        "trees": [_tree_json(est, task) for est in model.estimators_],
        "meta": {
            "source": f"scikit-learn {type(model).__name__}",
            "source_split_rule": "le",  # sklearn: left iff x <= threshold
        },
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Export a pickled scikit-learn forest to rf-interchange/1 JSON.")
    parser.add_argument("model", help="pickle/joblib file of a fitted ensemble")
    parser.add_argument("-o", "--output", required=True)
    args = parser.parse_args(argv)
    try:
        model = load_model(args.model)
        doc = export_model(model)
    except UnsupportedModel as exc:
        print(f"UnsupportedModel: {exc}", file=sys.stderr)
        return 1
    with open(args.output, "w") as fh:
        json.dump(doc, fh)
    print(f"exported {len(doc['trees'])} trees ({doc['task']}) to {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
