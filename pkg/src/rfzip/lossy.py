"""Lossy pipeline: tree subsampling and uniform fit quantization before the
lossless codec, with the predicted accuracy-loss bounds reported.

For a regression forest, each tree's error against the full-forest mean
prediction has some variance sigma^2; keeping a random subset of size m out of
A trees loses about sigma^2/m + sigma^2/A, and quantizing fits to b bits over
a range of width R adds (R/2^b)^2 / (12 m).  Both knobs trade distortion for
rate explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .container import CompressOptions, compress, inspect
from .errors import RangeError, TaskError
from .forest import (CLASSIFICATION, REGRESSION, Forest, Node,
                     encode_observation, iter_nodes, tree_fit)

SIGMA_MEAN = "mean"
SIGMA_MAX = "max"


@dataclass
class ErrorStats:
    per_tree_mean: np.ndarray      # e_t: each tree's mean error over the eval set
    mu: float                      # mean of e_t
    sigma2: float                  # aggregated error variance
    sigma2_per_obs: np.ndarray     # per-observation variance of the tree errors
    mode: str                      # mean or max aggregation over observations


def per_tree_predictions(forest: Forest, rows) -> np.ndarray:
    """(A, N) matrix of individual tree predictions."""
    encoded = [encode_observation(forest.schema, x) for x in rows]
    out = np.empty((forest.a, len(encoded)), dtype=np.float64)
    for t, root in enumerate(forest.trees):
        out[t] = [tree_fit(root, row) for row in encoded]
    return out


def estimate_error_stats(forest: Forest, rows, mode: str = SIGMA_MEAN) -> ErrorStats:
    """Per-tree deviations from the full-forest mean prediction on an eval set."""
    if forest.task != REGRESSION:
        raise TaskError("error statistics are defined for regression forests")
    rows = list(rows)
    if not rows:
        raise TaskError("empty evaluation set")
    if mode not in (SIGMA_MEAN, SIGMA_MAX):
        raise ValueError(f"unknown sigma aggregation {mode!r}")
    preds = per_tree_predictions(forest, rows)      # (A, N)
    mean_pred = preds.mean(axis=0)                  # the full-forest prediction
    errors = preds - mean_pred[None, :]             # e_t(i)
    per_tree_mean = errors.mean(axis=1)
    sigma2_per_obs = errors.var(axis=0)
    sigma2 = float(sigma2_per_obs.max() if mode == SIGMA_MAX else sigma2_per_obs.mean())
    return ErrorStats(per_tree_mean=per_tree_mean, mu=float(per_tree_mean.mean()),
                      sigma2=sigma2, sigma2_per_obs=sigma2_per_obs, mode=mode)


@dataclass(frozen=True)
class LossyPlan:
    sample_size: int                      # |A0|, trees kept
    fit_bits: int | None = None           # b; None leaves fits untouched
    fit_range: tuple[float, float] | None = None  # defaults to [min fit, max fit]
    seed: int = 0

    def validate(self, a: int) -> None:
        if not (1 <= self.sample_size <= a):
            raise ValueError(f"sample_size must be in 1..{a}")
        if self.fit_bits is not None and not (1 <= self.fit_bits <= 64):
            raise ValueError("fit_bits must be in 1..64")


def subsample_trees(forest: Forest, plan: LossyPlan) -> Forest:
    """Uniform sample without replacement, original tree order preserved."""
    plan.validate(forest.a)
    if plan.sample_size == forest.a:
        return forest
    rng = np.random.default_rng([plan.seed, forest.a])
    keep = np.sort(rng.choice(forest.a, size=plan.sample_size, replace=False))
    trees = tuple(forest.trees[int(i)] for i in keep)
    return Forest(schema=forest.schema, task=forest.task, trees=trees,
                  labels=forest.labels)


def fit_range_of(forest: Forest) -> tuple[float, float]:
    lo = math.inf
    hi = -math.inf
    for root in forest.trees:
        for node, _, _, _ in iter_nodes(root):
            lo = min(lo, node.fit)
            hi = max(hi, node.fit)
    return lo, hi


def _cell_representatives(values, lo: Fraction, delta: Fraction,
                          levels: int) -> dict[float, float]:
    """One float64 representative per occupied cell, honoring |v - q| <= delta/2.

    The exact midpoint may not be float-representable; a member sitting exactly
    half a cell away (the range maximum always does) can then land just past
    the bound, so the representative is nudged by ulps toward the violated
    side.  If no single float serves every member (possible only for cells a
    few ulps wide), the offenders keep their own values.
    """
    half = delta / 2
    cells: dict[int, list[float]] = {}
    for v in sorted(values):
        cell = int((Fraction(v) - lo) / delta)
        if cell >= levels:
            cell = levels - 1  # top edge joins the last cell
        cells.setdefault(cell, []).append(v)
    rep: dict[float, float] = {}
    for cell, members in cells.items():
        q = float(lo + (Fraction(2 * cell + 1) / 2) * delta)
        for _ in range(8):
            bad = [v for v in members
                   if abs(Fraction(q) - Fraction(v)) > half]
            if not bad:
                break
            q = math.nextafter(q, bad[0])
        else:
            bad = [v for v in members if abs(Fraction(q) - Fraction(v)) > half]
        for v in members:
            rep[v] = v if v in bad and abs(Fraction(q) - Fraction(v)) > half else q
    return rep


def quantize_fits(forest: Forest, plan: LossyPlan) -> Forest:
    """Uniform b-bit midpoint quantization of every fit; |v - q(v)| <= delta/2."""
    if forest.task != REGRESSION:
        raise TaskError("only regression fits are quantized")
    if plan.fit_bits is None:
        return forest
    lo_f, hi_f = plan.fit_range if plan.fit_range is not None else fit_range_of(forest)
    if not (hi_f > lo_f):
        return forest  # constant fits: nothing to quantize
    lo = Fraction(lo_f)
    delta = (Fraction(hi_f) - lo) / (1 << plan.fit_bits)
    levels = 1 << plan.fit_bits
    half = delta / 2

    distinct = set()
    for root in forest.trees:
        for node, _, _, _ in iter_nodes(root):
            if not (lo_f <= node.fit <= hi_f):
                raise RangeError(
                    f"fit {node.fit} outside the quantization range [{lo_f}, {hi_f}]")
            distinct.add(node.fit)
    rep = _cell_representatives(distinct, lo, delta, levels)
    for v, q in rep.items():
        assert abs(Fraction(q) - Fraction(v)) <= half

    trees = tuple(_map_fits(root, rep.__getitem__) for root in forest.trees)
    return Forest(schema=forest.schema, task=forest.task, trees=trees,
                  labels=forest.labels)


def _map_fits(root: Node, q) -> Node:
    new_root = Node(fit=q(root.fit), var=root.var, split=root.split)
    stack = [(root, new_root)]
    while stack:
        old, new = stack.pop()
        if old.is_leaf:
            continue
        new.left = Node(fit=q(old.left.fit), var=old.left.var, split=old.left.split)
        new.right = Node(fit=q(old.right.fit), var=old.right.var, split=old.right.split)
        stack.append((old.left, new.left))
        stack.append((old.right, new.right))
    return new_root


@dataclass
class LossyReport:
    a_full: int
    sample_size: int
    fit_bits: int | None
    sigma2: float | None
    delta: float | None
    subsample_loss_bound: float | None   # sigma^2/|A0| + sigma^2/|A|
    combined_bound: float | None         # sigma^2/|A0| + delta^2 / (12 |A0|)
    max_quantization_error: float
    mse_before: float | None
    mse_after: float | None
    size_before: int | None
    size_after: int

    def to_dict(self) -> dict:
        return {
            "trees_full": self.a_full,
            "trees_kept": self.sample_size,
            "fit_bits": self.fit_bits,
            "sigma2": self.sigma2,
            "quantization_step": self.delta,
            "subsample_loss_bound": self.subsample_loss_bound,
            "combined_loss_bound": self.combined_bound,
            "max_quantization_error": self.max_quantization_error,
            "mse_before": self.mse_before,
            "mse_after": self.mse_after,
            "compressed_bytes_before": self.size_before,
            "compressed_bytes_after": self.size_after,
        }


def _mse(forest: Forest, rows, targets) -> float:
    from .forest import predict
    errs = [predict(forest, x) - y for x, y in zip(rows, targets)]
    return float(np.mean(np.square(errs)))


def lossy_compress(forest: Forest, plan: LossyPlan,
                   opts: CompressOptions = CompressOptions(),
                   eval_rows=None, eval_targets=None,
                   sigma_mode: str = SIGMA_MEAN,
                   size_before: bool = False) -> tuple[bytes, LossyReport]:
    """subsample -> quantize -> lossless compress, with the predicted bounds."""
    plan.validate(forest.a)
    if forest.task == CLASSIFICATION and plan.fit_bits is not None:
        raise TaskError("classification fits are categorical; only subsampling applies")
    reduced = subsample_trees(forest, plan)
    delta = None
    max_err = 0.0
    if plan.fit_bits is not None and forest.task == REGRESSION:
        lo, hi = plan.fit_range if plan.fit_range is not None else fit_range_of(reduced)
        quantized = quantize_fits(reduced, LossyPlan(
            sample_size=reduced.a, fit_bits=plan.fit_bits, fit_range=(lo, hi),
            seed=plan.seed))
        if hi > lo:
            delta = (hi - lo) / (1 << plan.fit_bits)
            for old_root, new_root in zip(reduced.trees, quantized.trees):
                for (o, _, _, _), (nnode, _, _, _) in zip(iter_nodes(old_root),
                                                          iter_nodes(new_root)):
                    max_err = max(max_err, abs(o.fit - nnode.fit))
    else:
        quantized = reduced
    data = compress(quantized, opts)

    sigma2 = None
    sub_bound = None
    combined = None
    mse_before = mse_after = None
    if eval_rows is not None and forest.task == REGRESSION:
        stats = estimate_error_stats(forest, eval_rows, mode=sigma_mode)
        sigma2 = stats.sigma2
        sub_bound = sigma2 / plan.sample_size + sigma2 / forest.a
        combined = sigma2 / plan.sample_size
        if delta is not None:
            combined += delta * delta / (12 * plan.sample_size)
        if eval_targets is not None:
            mse_before = _mse(forest, eval_rows, eval_targets)
            mse_after = _mse(quantized, eval_rows, eval_targets)
    before_bytes = len(compress(forest, opts)) if size_before else None
    report = LossyReport(
        a_full=forest.a, sample_size=plan.sample_size, fit_bits=plan.fit_bits,
        sigma2=sigma2, delta=delta, subsample_loss_bound=sub_bound,
        combined_bound=combined, max_quantization_error=max_err,
        mse_before=mse_before, mse_after=mse_after,
        size_before=before_bytes, size_after=len(data))
    return data, report


def subsample_variance_mc(per_tree_mean: np.ndarray, sample_size: int,
                          trials: int, seed: int = 0) -> float:
    """Monte-Carlo variance of (subsample mean error - full mean error)."""
    e = np.asarray(per_tree_mean, dtype=np.float64)
    full_mean = e.mean()
    rng = np.random.default_rng([seed, sample_size])
    diffs = np.empty(trials)
    for i in range(trials):
        pick = rng.choice(len(e), size=sample_size, replace=False)
        diffs[i] = e[pick].mean() - full_mean
    return float(diffs.var())


def payload_bytes(data: bytes) -> int:
    """Structure + names + splits + fits bytes (tables and index excluded)."""
    rep = inspect(data)
    return rep.structure + rep.names + rep.splits + rep.fits
