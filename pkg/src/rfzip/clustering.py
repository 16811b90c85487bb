"""KL-divergence k-means over conditional models.

The objective for K clusters with centers Q_k is

    sum_k sum_{i in C_k} n_i * D(P_i || Q_k)  +  alpha * B * K      [bits]

where alpha is the per-line dictionary cost and B the alphabet size.  Centers
that minimize a cluster's divergence sum are the sample-weighted means of its
member distributions, so Lloyd iterations never increase the objective.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput

_MAX_ITER = 100
_REL_EPS = 1e-9


@dataclass
class ClusteringProblem:
    dists: np.ndarray       # (M, B) rows are probability vectors P_i
    weights: np.ndarray     # (M,) sample counts n_i
    alpha: float            # bits per dictionary line
    k_max: int = 32
    seed: int = 0
    restarts: int = 8

    @property
    def m(self) -> int:
        return self.dists.shape[0]

    @property
    def b(self) -> int:
        return self.dists.shape[1]


@dataclass
class ClusteringResult:
    k: int
    assignment: np.ndarray          # (M,) model -> cluster id
    centers: np.ndarray             # (K, B)
    objective: float                # divergence + alpha*B*K, in bits
    divergence: float               # the data term alone
    objective_trace: list[float] = field(default_factory=list)


def problem_from_models(models, alpha: float, k_max: int = 32, seed: int = 0,
                        restarts: int = 8) -> ClusteringProblem:
    """Build a problem from ConditionalModel objects sharing one alphabet."""
    models = list(models)
    if not models:
        raise DegenerateInput("no models to cluster")
    b = len(models[0].counts)
    dists = np.zeros((len(models), b), dtype=np.float64)
    weights = np.zeros(len(models), dtype=np.float64)
    for i, m in enumerate(models):
        counts = np.asarray(m.counts, dtype=np.float64)
        n = counts.sum()
        dists[i] = counts / n
        weights[i] = n
    return ClusteringProblem(dists=dists, weights=weights, alpha=alpha,
                             k_max=k_max, seed=seed, restarts=restarts)


def center_of(dists: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted mean distribution; its support covers every member's support."""
    w = np.asarray(weights, dtype=np.float64)
    q = (w[:, None] * np.asarray(dists, dtype=np.float64)).sum(axis=0) / w.sum()
    return q


def _plogp(dists: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(dists > 0, np.log2(np.where(dists > 0, dists, 1.0)), 0.0)
    return (dists * lg).sum(axis=1)


def divergence_matrix(dists: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """(M, K) of D(P_i || Q_k) in bits; +inf where a center misses support."""
    with np.errstate(divide="ignore", invalid="ignore"):
        logq = np.log2(centers)          # -inf at zeros
        cross = np.zeros((dists.shape[0], centers.shape[0]))
        for k in range(centers.shape[0]):
            lq = logq[k]
            bad = (dists > 0) & np.isneginf(lq)[None, :]
            t = np.where(dists > 0, dists * lq[None, :], 0.0)
            s = t.sum(axis=1)
            cross[:, k] = np.where(bad.any(axis=1), -np.inf, s)
    div = _plogp(dists)[:, None] - cross
    return np.maximum(div, 0.0)


def _weighted_divergence(prob: ClusteringProblem, centers: np.ndarray) -> np.ndarray:
    return prob.weights[:, None] * divergence_matrix(prob.dists, centers)


def _seed_centers(prob: ClusteringProblem, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++-style seeding with distance n_i * D(P_i || P_seed).

    Each step samples a few candidates from the current distance distribution
    and keeps the one that lowers the total distance most (infinite-distance
    models, whose support no seed covers yet, take priority).
    """
    m = prob.m
    first = int(rng.integers(m))
    chosen = [first]
    n_candidates = 2 + int(np.log2(k)) if k > 1 else 1
    if k > 1:
        dist = prob.weights * divergence_matrix(prob.dists, prob.dists[[first]])[:, 0]
        dist[first] = 0.0
        for _ in range(k - 1):
            inf_mask = np.isinf(dist)
            if inf_mask.any():
                pool = np.flatnonzero(inf_mask)
                cands = pool[rng.integers(len(pool), size=min(n_candidates, len(pool)))]
            else:
                total = dist.sum()
                if total <= 0:
                    remaining = [i for i in range(m) if i not in chosen]
                    if not remaining:
                        break
                    cands = np.array([remaining[int(rng.integers(len(remaining)))]])
                else:
                    cands = rng.choice(m, size=n_candidates, p=dist / total)
            best_next, best_dist, best_score = None, None, None
            for cand in dict.fromkeys(int(c) for c in cands):
                nd = prob.weights * divergence_matrix(prob.dists,
                                                      prob.dists[[cand]])[:, 0]
                nd = np.minimum(dist, nd)
                nd[cand] = 0.0
                finite = nd[np.isfinite(nd)]
                score = (np.isinf(nd).sum(), float(finite.sum()))
                if best_score is None or score < best_score:
                    best_next, best_dist, best_score = cand, nd, score
            chosen.append(best_next)
            dist = best_dist
    centers = prob.dists[chosen].copy()
    while centers.shape[0] < k:  # duplicate-heavy inputs may run out of seeds
        centers = np.vstack([centers, prob.dists[[first]]])
    return centers


def _assign(prob: ClusteringProblem, centers: np.ndarray):
    wd = _weighted_divergence(prob, centers)
    assign = np.argmin(wd, axis=1)
    picked = wd[np.arange(prob.m), assign]
    return assign, picked


def _repair(prob: ClusteringProblem, centers: np.ndarray, k: int):
    """Make every model's divergence finite and every cluster non-empty.

    A model with no finite center seeds the emptiest cluster with its own
    distribution; if that cycles, fall back to one global-mean center (always
    finite) and re-seed the rest.  Empty clusters are then refilled with the
    largest-contribution model.  Neither step can leave infinities because a
    cluster seeded at a member's own distribution serves it at divergence 0.
    """
    assign, picked = _assign(prob, centers)
    fixes = 0
    while np.isinf(picked).any():
        fixes += 1
        if fixes > prob.m + k:
            centers[0] = center_of(prob.dists, prob.weights)
            for c in range(1, k):
                centers[c] = prob.dists[min(c - 1, prob.m - 1)]
            assign, picked = _assign(prob, centers)
            break
        i = int(np.flatnonzero(np.isinf(picked))[0])
        sizes = np.bincount(assign, minlength=k)
        target = int(np.argmin(sizes))
        centers[target] = prob.dists[i]
        assign, picked = _assign(prob, centers)
    for _ in range(k):
        sizes = np.bincount(assign, minlength=k)
        empty = np.flatnonzero(sizes == 0)
        if len(empty) == 0:
            break
        # Donate from a cluster that keeps at least one member (k <= M
        # guarantees one exists), so each pass strictly fills one cluster.
        # The donor is placed directly: its divergence to its own copy is 0.
        movable = sizes[assign] >= 2
        if not movable.any():
            break
        scores = np.where(movable, picked, -1.0)
        donor = int(np.argmax(scores))
        target = int(empty[0])
        centers[target] = prob.dists[donor]
        assign[donor] = target
        picked[donor] = 0.0
    return assign, picked


def _lloyd(prob: ClusteringProblem, k: int, rng: np.random.Generator):
    centers = _seed_centers(prob, k, rng)
    assignment = np.full(prob.m, -1, dtype=np.int64)
    trace: list[float] = []
    dict_cost = prob.alpha * prob.b * k
    for _ in range(_MAX_ITER):
        new_assign, picked = _repair(prob, centers, k)
        objective = float(picked.sum()) + dict_cost
        trace.append(objective)
        if np.array_equal(new_assign, assignment):
            break
        assignment = new_assign
        for c in range(k):
            mask = assignment == c
            if mask.any():
                centers[c] = center_of(prob.dists[mask], prob.weights[mask])
    wd = _weighted_divergence(prob, centers)
    divergence = float(wd[np.arange(prob.m), assignment].sum())
    objective = divergence + dict_cost
    trace.append(objective)
    return ClusteringResult(k=k, assignment=assignment, centers=centers,
                            objective=objective, divergence=divergence,
                            objective_trace=trace)


def cluster_fixed_k(prob: ClusteringProblem, k: int) -> ClusteringResult:
    """Best of `restarts` seeded runs; the per-run objective never increases."""
    if prob.m == 0:
        raise DegenerateInput("no models to cluster")
    if not (1 <= k <= prob.m):
        raise ValueError(f"k={k} out of range for {prob.m} models")
    if k == 1:
        centers = center_of(prob.dists, prob.weights)[None, :]
        wd = _weighted_divergence(prob, centers)
        divergence = float(wd[:, 0].sum())
        objective = divergence + prob.alpha * prob.b
        return ClusteringResult(k=1, assignment=np.zeros(prob.m, dtype=np.int64),
                                centers=centers, objective=objective,
                                divergence=divergence, objective_trace=[objective])
    best: ClusteringResult | None = None
    for r in range(prob.restarts):
        rng = np.random.default_rng([prob.seed, k, r])
        result = _lloyd(prob, k, rng)
        for prev, cur in zip(result.objective_trace, result.objective_trace[1:]):
            if cur > prev * (1 + _REL_EPS) + _REL_EPS:
                raise AssertionError(
                    f"objective increased within a run: {prev} -> {cur}")
        if best is None or result.objective < best.objective:
            best = result
    return best


def cluster_search(prob: ClusteringProblem) -> ClusteringResult:
    """Minimize the objective over k = 1..min(k_max, M).

    Once alpha*B*k alone reaches the best objective seen, no larger k can win
    (the divergence term is nonnegative), so the scan stops early.
    """
    if prob.m == 0:
        raise DegenerateInput("no models to cluster")
    best: ClusteringResult | None = None
    for k in range(1, min(prob.k_max, prob.m) + 1):
        if best is not None and prob.alpha * prob.b * k >= best.objective:
            break
        result = cluster_fixed_k(prob, k)
        if best is None or result.objective < best.objective:
            best = result
    return best
