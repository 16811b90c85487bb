"""Command-line interface tying the pipeline together.

Exit codes: 0 ok, 1 user error (bad input/arguments), 2 corrupt input.
Errors print one line to stderr: `<ErrorClass>: <message>`.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import baseline as baseline_mod
from . import container as container_mod
from . import lossy as lossy_mod
from . import trainer as trainer_mod
from .container import CompressOptions
from .errors import (CorruptContainer, MalformedSequence, RfzError,
                     TruncatedStream)
from .forest import CLASSIFICATION, Forest, parse_forest, serialize_forest


def _read_forest(path: str) -> Forest:
    with open(path, "rb") as fh:
        return parse_forest(fh.read())


def _read_any(path: str):
    """Return ('container', bytes) or ('forest', Forest) by sniffing the magic."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] == container_mod.MAGIC:
        return "container", data
    return "forest", parse_forest(data)


def _load_rows(path: str, forest_like) -> list[tuple]:
    """Map CSV rows to schema order by header name; empty cells are missing."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise RfzError("empty CSV")
    header, data = rows[0], rows[1:]
    schema = forest_like.schema
    positions = []
    for var in schema.variables:
        if var.name not in header:
            raise RfzError(f"CSV lacks column {var.name!r}")
        positions.append(header.index(var.name))
    out = []
    for r in data:
        obs = []
        for var, pos in zip(schema.variables, positions):
            cell = r[pos]
            if cell == "":
                obs.append(None)
            elif var.kind == "numerical":
                obs.append(float(cell))
            else:
                obs.append(cell)
        out.append(tuple(obs))
    return out


def _cmd_train(args) -> int:
    with open(args.data) as fh:
        text = fh.read()
    kinds = None
    if args.schema:
        with open(args.schema) as fh:
            kinds = json.load(fh).get("kinds")
    ds = trainer_mod.load_csv(text, target=args.target, kinds=kinds, task=args.task)
    cfg = trainer_mod.TrainConfig(n_trees=args.trees, mtry=args.mtry,
                                  min_leaf=args.min_leaf, seed=args.seed)
    forest = trainer_mod.train(ds, cfg)
    with open(args.output, "w") as fh:
        fh.write(serialize_forest(forest))
    print(f"trained {forest.a} trees ({forest.task}), wrote {args.output}")
    return 0


def _cmd_compress(args) -> int:
    forest = _read_forest(args.forest)
    opts = CompressOptions(k_max=args.kmax, seed=args.seed, fit_coder=args.fit_coder)
    data = container_mod.compress(forest, opts)
    with open(args.output, "wb") as fh:
        fh.write(data)
    report = container_mod.inspect(data)
    print(json.dumps(report.to_dict()))
    return 0


def _cmd_decompress(args) -> int:
    with open(args.container, "rb") as fh:
        data = fh.read()
    forest = container_mod.decompress(data)
    with open(args.output, "w") as fh:
        fh.write(serialize_forest(forest))
    print(f"decoded {forest.a} trees, wrote {args.output}")
    return 0


def _cmd_predict(args) -> int:
    kind, payload = _read_any(args.model)
    if kind == "container":
        loaded = container_mod.load(payload)
        rows = _load_rows(args.data, loaded)
        preds = [container_mod.predict_compressed(loaded, x) for x in rows]
        labels = loaded.labels
        task = loaded.task
    else:
        rows = _load_rows(args.data, payload)
        from .forest import predict
        preds = [predict(payload, x) for x in rows]
        labels = payload.labels
        task = payload.task
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["prediction"])
    for p in preds:
        writer.writerow([labels[p] if task == CLASSIFICATION else repr(p)])
    if args.output == "-":
        sys.stdout.write(buf.getvalue())
    else:
        with open(args.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
    return 0


def _cmd_inspect(args) -> int:
    with open(args.container, "rb") as fh:
        data = fh.read()
    report = container_mod.inspect(data)
    if args.json:
        print(json.dumps(report.to_dict()))
    else:
        rows = [("structure", report.structure), ("names", report.names),
                ("splits", report.splits), ("fits", report.fits),
                ("tables", report.tables), ("total", report.total)]
        width = max(len(n) for n, _ in rows)
        for name, size in rows:
            print(f"{name:<{width}}  {size:>12} bytes")
    return 0


def _cmd_baseline(args) -> int:
    forest = _read_forest(args.forest)
    report = baseline_mod.baseline_report(forest)
    print(json.dumps(report.to_dict()))
    return 0


def _cmd_lossy(args) -> int:
    forest = _read_forest(args.forest)
    opts = CompressOptions(k_max=args.kmax, seed=args.seed)
    eval_rows = eval_targets = None
    if args.eval:
        ds = trainer_mod.load_csv(open(args.eval).read(), target=args.target)
        eval_rows = [ds.row(i) for i in range(ds.n)]
        eval_targets = ds.targets.tolist()
    if args.sweep:
        writer = csv.writer(sys.stdout)
        if args.sweep == "bits":
            writer.writerow(["fit_bits", "mse", "bytes"])
            grid = range(1, 17)
            for b in grid:
                plan = lossy_mod.LossyPlan(sample_size=args.sample_trees or forest.a,
                                           fit_bits=b, seed=args.seed)
                data, rep = lossy_mod.lossy_compress(
                    forest, plan, opts, eval_rows=eval_rows, eval_targets=eval_targets)
                writer.writerow([b, rep.mse_after, rep.size_after])
        else:
            writer.writerow(["trees", "mse", "bytes"])
            for m in sorted({max(1, forest.a * f // 100) for f in (1, 5, 10, 25, 50, 75, 100)}):
                plan = lossy_mod.LossyPlan(sample_size=m, fit_bits=args.fit_bits,
                                           seed=args.seed)
                data, rep = lossy_mod.lossy_compress(
                    forest, plan, opts, eval_rows=eval_rows, eval_targets=eval_targets)
                writer.writerow([m, rep.mse_after, rep.size_after])
        return 0
    plan = lossy_mod.LossyPlan(sample_size=args.sample_trees or forest.a,
                               fit_bits=args.fit_bits, seed=args.seed)
    data, report = lossy_mod.lossy_compress(
        forest, plan, opts, eval_rows=eval_rows, eval_targets=eval_targets,
        sigma_mode=lossy_mod.SIGMA_MAX if args.conservative else lossy_mod.SIGMA_MEAN,
        size_before=bool(eval_rows))
    with open(args.output, "wb") as fh:
        fh.write(data)
    print(json.dumps(report.to_dict()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rfzip",
                                description="Random-forest codec: train, compress, "
                                            "decompress, predict, inspect.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a forest from a CSV")
    t.add_argument("data")
    t.add_argument("--trees", type=int, default=100)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--min-leaf", type=int, default=5)
    t.add_argument("--mtry", type=int, default=None)
    t.add_argument("--target", default=None, help="target column (default: last)")
    t.add_argument("--task", choices=["classification", "regression"], default=None)
    t.add_argument("--schema", default=None, help="sidecar JSON declaring column kinds")
    t.add_argument("-o", "--output", required=True)
    t.set_defaults(func=_cmd_train)

    c = sub.add_parser("compress", help="forest JSON -> .rfz container")
    c.add_argument("forest")
    c.add_argument("--kmax", type=int, default=32)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--fit-coder", choices=["auto", "huffman", "arithmetic"],
                   default="auto", dest="fit_coder")
    c.add_argument("-o", "--output", required=True)
    c.set_defaults(func=_cmd_compress)

    d = sub.add_parser("decompress", help=".rfz container -> forest JSON")
    d.add_argument("container")
    d.add_argument("-o", "--output", required=True)
    d.set_defaults(func=_cmd_decompress)

    pr = sub.add_parser("predict", help="predict a CSV from a forest or container")
    pr.add_argument("model", help="forest.json or container.rfz")
    pr.add_argument("data")
    pr.add_argument("-o", "--output", default="-")
    pr.set_defaults(func=_cmd_predict)

    i = sub.add_parser("inspect", help="per-section size breakdown")
    i.add_argument("container")
    i.add_argument("--json", action="store_true")
    i.set_defaults(func=_cmd_inspect)

    b = sub.add_parser("baseline", help="light-representation DEFLATE size")
    b.add_argument("forest")
    b.set_defaults(func=_cmd_baseline)

    lo = sub.add_parser("lossy", help="subsample/quantize, then compress")
    lo.add_argument("forest")
    lo.add_argument("-o", "--output", default="out.rfz")
    lo.add_argument("--sample-trees", type=int, default=None, dest="sample_trees")
    lo.add_argument("--fit-bits", type=int, default=None, dest="fit_bits")
    lo.add_argument("--eval", default=None, help="CSV for error estimation")
    lo.add_argument("--target", default=None)
    lo.add_argument("--seed", type=int, default=0)
    lo.add_argument("--kmax", type=int, default=32)
    lo.add_argument("--conservative", action="store_true",
                    help="aggregate sigma^2 with max instead of mean")
    lo.add_argument("--sweep", choices=["bits", "trees"], default=None,
                    help="emit a CSV of (knob, MSE, size) instead of one container")
    lo.set_defaults(func=_cmd_lossy)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorruptContainer, MalformedSequence, TruncatedStream) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (RfzError, OSError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
