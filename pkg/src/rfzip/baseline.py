"""Prediction-only forest serialization compressed with raw DEFLATE (RFC 1951).

This is the reference point the codec is measured against: keep only what
prediction needs (structure, split indexes, fit indexes, value tables), then
let a general-purpose byte compressor do its best.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

from .bitio import ByteCursor, write_uvarint
from .errors import CorruptContainer
from .forest import (CATEGORICAL, CLASSIFICATION, Forest, Node, Variable,
                     VariableSchema, iter_nodes, validate_forest)
from .models import ValueTables, build_value_tables


def light_bytes(forest: Forest) -> bytes:
    """The uncompressed light representation."""
    validate_forest(forest)
    tables = build_value_tables(forest)
    out = bytearray()
    out.append(0 if forest.task == CLASSIFICATION else 1)
    write_uvarint(out, forest.schema.n_obs)
    write_uvarint(out, forest.schema.d)
    for var in forest.schema.variables:
        raw = var.name.encode("utf-8")
        write_uvarint(out, len(raw))
        out += raw
        out.append(1 if var.kind == CATEGORICAL else 0)
        if var.kind == CATEGORICAL:
            write_uvarint(out, var.n_categories)
            for cat in var.categories:
                craw = cat.encode("utf-8")
                write_uvarint(out, len(craw))
                out += craw
    write_uvarint(out, len(forest.labels))
    for label in forest.labels:
        raw = label.encode("utf-8")
        write_uvarint(out, len(raw))
        out += raw
    for var in range(forest.schema.d):
        values = tables.split_values[var]
        write_uvarint(out, len(values))
        if forest.schema.variables[var].kind == CATEGORICAL:
            for mask in values:
                write_uvarint(out, mask)
        else:
            for pattern in values:
                out += pattern.to_bytes(8, "little")
    write_uvarint(out, len(tables.fit_values))
    if forest.task == CLASSIFICATION:
        for label_idx in tables.fit_values:
            write_uvarint(out, label_idx)
    else:
        for pattern in tables.fit_values:
            out += pattern.to_bytes(8, "little")
    write_uvarint(out, forest.a)
    for root in forest.trees:
        for node, _depth, _father, _pos in iter_nodes(root):
            out.append(0 if node.is_leaf else 1)
            if not node.is_leaf:
                write_uvarint(out, node.var)
                write_uvarint(out, tables.split_symbol(node.var, node.split))
            write_uvarint(out, tables.fit_symbol(forest.task, node.fit))
    return bytes(out)


def light_compress(forest: Forest) -> bytes:
    comp = zlib.compressobj(level=9, wbits=-15)
    return comp.compress(light_bytes(forest)) + comp.flush()


def light_decompress(data: bytes) -> Forest:
    try:
        raw = zlib.decompressobj(wbits=-15).decompress(data)
    except zlib.error as exc:
        raise CorruptContainer(f"not a DEFLATE stream: {exc}") from None
    cur = ByteCursor(raw)
    task = CLASSIFICATION if cur.read_u8() == 0 else "regression"
    n_obs = cur.read_uvarint()
    d = cur.read_uvarint()
    variables = []
    for _ in range(d):
        name = cur.read(cur.read_uvarint()).decode("utf-8")
        if cur.read_u8() == 1:
            n_cat = cur.read_uvarint()
            cats = tuple(cur.read(cur.read_uvarint()).decode("utf-8")
                         for _ in range(n_cat))
            variables.append(Variable(name, CATEGORICAL, cats))
        else:
            variables.append(Variable(name, "numerical"))
    schema = VariableSchema(tuple(variables), n_obs)
    labels = tuple(cur.read(cur.read_uvarint()).decode("utf-8")
                   for _ in range(cur.read_uvarint()))
    split_values = []
    for var in range(d):
        c = cur.read_uvarint()
        if variables[var].kind == CATEGORICAL:
            split_values.append([cur.read_uvarint() for _ in range(c)])
        else:
            split_values.append([cur.read_u64le() for _ in range(c)])
    c_f = cur.read_uvarint()
    if task == CLASSIFICATION:
        fit_values = [cur.read_uvarint() for _ in range(c_f)]
    else:
        fit_values = [cur.read_u64le() for _ in range(c_f)]
    tables = ValueTables(split_values=split_values, fit_values=fit_values)
    a = cur.read_uvarint()
    trees = tuple(_read_tree(cur, schema, tables, task) for _ in range(a))
    forest = Forest(schema=schema, task=task, trees=trees, labels=labels)
    validate_forest(forest)
    return forest


def _read_tree(cur: ByteCursor, schema: VariableSchema, tables: ValueTables,
               task: str) -> Node:
    holder = Node(fit=None)
    stack = [(holder, "left")]
    while stack:
        parent, side = stack.pop()
        internal = cur.read_u8() == 1
        if internal:
            var = cur.read_uvarint()
            split = tables.split_value(schema, var, cur.read_uvarint())
            fit = tables.fit_value(task, cur.read_uvarint())
            node = Node(fit=fit, var=var, split=split)
            setattr(parent, side, node)
            stack.append((node, "right"))
            stack.append((node, "left"))
        else:
            fit = tables.fit_value(task, cur.read_uvarint())
            setattr(parent, side, Node(fit=fit))
    root = holder.left
    holder.left = None
    return root


@dataclass
class BaselineReport:
    raw_bytes: int
    deflated_bytes: int

    def to_dict(self) -> dict:
        return {"light_raw_bytes": self.raw_bytes,
                "light_deflate_bytes": self.deflated_bytes}


def baseline_report(forest: Forest) -> BaselineReport:
    raw = light_bytes(forest)
    comp = zlib.compressobj(level=9, wbits=-15)
    deflated = comp.compress(raw) + comp.flush()
    return BaselineReport(raw_bytes=len(raw), deflated_bytes=len(deflated))
