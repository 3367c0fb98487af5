"""Bagged decision-tree ensemble with leaf-fraction class posteriors.

Trees are axis-aligned, grown on bootstrap resamples until leaves are pure or
hold fewer than two samples, minimizing Gini impurity over ceil(sqrt(d))
randomly drawn candidate features per split. The posterior for a probe is the
mean over trees of the positive-class fraction in the reached leaf.

Training samples are canonically sorted before bootstrapping, so permuting
the input rows never changes the fitted model for a fixed seed. The hot loops
are compiled with numba when it is importable and run as plain Python
otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def _grow_tree(X, y, boot, mtry, seed,
               node_feature, node_threshold, node_left, node_right,
               node_pos, node_total):
    """Grow one tree in place over preallocated node arrays; returns node count.

    Split candidates are midpoints between consecutive distinct sorted values.
    Ties on weighted Gini break toward the lowest feature index, then the
    lowest threshold. Constant features do not count toward the mtry quota, so
    an impure splittable node is never turned into a leaf by an unlucky draw.
    """
    n = boot.shape[0]
    d = X.shape[1]
    np.random.seed(seed)
    idx = boot.copy()
    tmp = np.empty(n, np.int64)
    perm = np.empty(d, np.int64)

    # manual stack of (node, lo, hi) ranges over idx
    cap = 2 * n + 2
    stack_node = np.empty(cap, np.int64)
    stack_lo = np.empty(cap, np.int64)
    stack_hi = np.empty(cap, np.int64)
    top = 0
    stack_node[top] = 0
    stack_lo[top] = 0
    stack_hi[top] = n
    top += 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo

        npos = 0
        for i in range(lo, hi):
            npos += y[idx[i]]
        node_pos[node] = npos
        node_total[node] = m
        if npos == 0 or npos == m or m < 2:
            continue  # leaf: pure or too small

        for j in range(d):
            perm[j] = j
        best_cost = np.inf
        best_f = -1
        best_thr = 0.0
        examined = 0
        for k in range(d):
            j = k + np.random.randint(0, d - k)
            p = perm[k]
            perm[k] = perm[j]
            perm[j] = p
            f = perm[k]

            vmin = X[idx[lo], f]
            vmax = vmin
            for i in range(lo + 1, hi):
                v = X[idx[i], f]
                if v < vmin:
                    vmin = v
                elif v > vmax:
                    vmax = v
            if vmin == vmax:
                continue  # constant within the node, does not consume the quota
            examined += 1

            vals = np.empty(m, np.float64)
            for i in range(m):
                vals[i] = X[idx[lo + i], f]
            order = np.argsort(vals)
            cpos = 0
            for i in range(m - 1):
                v_i = vals[order[i]]
                cpos += y[idx[lo + order[i]]]
                v_n = vals[order[i + 1]]
                if v_i == v_n:
                    continue
                thr = 0.5 * (v_i + v_n)
                if thr >= v_n:  # midpoint rounded up to the right value
                    thr = v_i
                nl = i + 1
                nr = m - nl
                pl = cpos
                pr = npos - cpos
                fl = pl / nl
                fr = pr / nr
                gl = 1.0 - fl * fl - (1.0 - fl) * (1.0 - fl)
                gr = 1.0 - fr * fr - (1.0 - fr) * (1.0 - fr)
                cost = (nl * gl + nr * gr) / m
                if cost < best_cost or (
                    cost == best_cost
                    and (f < best_f or (f == best_f and thr < best_thr))
                ):
                    best_cost = cost
                    best_f = f
                    best_thr = thr
            if examined >= mtry:
                break

        if best_f < 0:
            continue  # every feature constant: stay a leaf

        node_feature[node] = best_f
        node_threshold[node] = best_thr
        nl = 0
        nr = 0
        for i in range(lo, hi):
            if X[idx[i], best_f] <= best_thr:
                tmp[lo + nl] = idx[i]
                nl += 1
            else:
                tmp[hi - 1 - nr] = idx[i]
                nr += 1
        for i in range(lo, lo + nl):
            idx[i] = tmp[i]
        # keep right block in original order
        for i in range(nr):
            idx[lo + nl + i] = tmp[hi - 1 - i]

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        node_left[node] = left_id
        node_right[node] = right_id
        stack_node[top] = left_id
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        top += 1
        stack_node[top] = right_id
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        top += 1

    return n_nodes


@njit(cache=True)
def _accumulate_leaf_fractions(node_feature, node_threshold, node_left, node_right,
                               node_pos, node_total, X, out):
    for i in range(X.shape[0]):
        node = 0
        while node_feature[node] >= 0:
            if X[i, node_feature[node]] <= node_threshold[node]:
                node = node_left[node]
            else:
                node = node_right[node]
        out[i] += node_pos[node] / node_total[node]


@dataclass
class Tree:
    feature: np.ndarray  # int64, -1 marks a leaf
    threshold: np.ndarray  # float64
    left: np.ndarray  # int64
    right: np.ndarray  # int64
    pos: np.ndarray  # int64 positive-sample count per node
    total: np.ndarray  # int64 sample count per node


@dataclass
class Forest:
    n_trees: int
    feature_count: int
    seed: int
    trees: list[Tree]


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    # lexsort uses the last key as primary; we want column 0 primary, label last
    return np.lexsort((y,) + tuple(X[:, j] for j in range(X.shape[1] - 1, -1, -1)))


def fit(samples, n_trees: int = 100, seed: int = 0, bootstrap: bool = True) -> Forest:
    """Train the ensemble on (feature vector, label) samples.

    ``bootstrap=False`` trains every tree on the full sample (test-only mode
    used to check the pure-leaf property).
    """
    X, y = _as_arrays(samples)
    return fit_arrays(X, y, n_trees=n_trees, seed=seed, bootstrap=bootstrap)


def _as_arrays(samples):
    if isinstance(samples, tuple) and len(samples) == 2 and isinstance(samples[0], np.ndarray):
        X, y = samples
    else:
        rows = list(samples)
        if not rows:
            raise DataError("cannot fit a forest on zero samples")
        X = np.asarray([np.asarray(r[0], dtype=np.float64) for r in rows], dtype=np.float64)
        y = np.asarray([int(r[1]) for r in rows], dtype=np.int64)
    return X, y


def fit_arrays(X: np.ndarray, y: np.ndarray, n_trees: int = 100, seed: int = 0,
               bootstrap: bool = True) -> Forest:
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise DataError("feature matrix must be 2-D")
    n, d = X.shape
    if y.shape != (n,):
        raise DataError("labels misaligned with feature matrix")
    if n < 2:
        raise DataError("need at least 2 samples to fit a forest")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be 0 or 1")
    if y.min() == y.max():
        raise DataError("both classes must be present to fit a forest")
    if n_trees < 1:
        raise DataError("n_trees must be positive")

    order = _canonical_order(X, y)
    X = np.ascontiguousarray(X[order])
    y = np.ascontiguousarray(y[order])

    mtry = math.ceil(math.sqrt(d))
    trees: list[Tree] = []
    for t in range(n_trees):
        ss = np.random.SeedSequence(entropy=(seed, t))
        boot_ss, kernel_ss = ss.spawn(2)
        if bootstrap:
            boot = np.random.default_rng(boot_ss).integers(0, n, size=n, dtype=np.int64)
        else:
            boot = np.arange(n, dtype=np.int64)
        kernel_seed = int(kernel_ss.generate_state(1, np.uint32)[0])
        cap = 2 * n + 2
        feature = np.full(cap, -1, dtype=np.int64)
        threshold = np.zeros(cap, dtype=np.float64)
        left = np.full(cap, -1, dtype=np.int64)
        right = np.full(cap, -1, dtype=np.int64)
        pos = np.zeros(cap, dtype=np.int64)
        total = np.zeros(cap, dtype=np.int64)
        n_nodes = _grow_tree(X, y, boot, mtry, kernel_seed,
                             feature, threshold, left, right, pos, total)
        trees.append(Tree(
            feature=feature[:n_nodes].copy(),
            threshold=threshold[:n_nodes].copy(),
            left=left[:n_nodes].copy(),
            right=right[:n_nodes].copy(),
            pos=pos[:n_nodes].copy(),
            total=total[:n_nodes].copy(),
        ))
    return Forest(n_trees=n_trees, feature_count=d, seed=seed, trees=trees)


def posterior_many(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Positive-class posterior for each row: mean leaf fraction over trees."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim != 2 or X.shape[1] != forest.feature_count:
        raise DataError(
            f"probe dimension {X.shape} does not match forest feature count {forest.feature_count}"
        )
    acc = np.zeros(X.shape[0], dtype=np.float64)
    for tree in forest.trees:
        _accumulate_leaf_fractions(tree.feature, tree.threshold, tree.left, tree.right,
                                   tree.pos, tree.total, X, acc)
    return acc / forest.n_trees


def posterior(forest: Forest, x) -> float:
    """Posterior probability of the friend class for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("posterior expects a single 1-D feature vector")
    return float(posterior_many(forest, x[None, :])[0])


def save_forest(forest: Forest, path) -> None:
    """Persist to a flat JSON file with one node-array record per tree."""
    payload = {
        "n_trees": forest.n_trees,
        "feature_count": forest.feature_count,
        "seed": forest.seed,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "pos": t.pos.tolist(),
                "total": t.total.tolist(),
            }
            for t in forest.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_forest(path) -> Forest:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    trees = [
        Tree(
            feature=np.asarray(t["feature"], dtype=np.int64),
            threshold=np.asarray(t["threshold"], dtype=np.float64),
            left=np.asarray(t["left"], dtype=np.int64),
            right=np.asarray(t["right"], dtype=np.int64),
            pos=np.asarray(t["pos"], dtype=np.int64),
            total=np.asarray(t["total"], dtype=np.int64),
        )
        for t in payload["trees"]
    ]
    return Forest(
        n_trees=payload["n_trees"],
        feature_count=payload["feature_count"],
        seed=payload["seed"],
        trees=trees,
    )
