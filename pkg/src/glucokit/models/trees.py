"""Variance-reduction regression trees, random forests and gradient boosting.

Trees are grown depth-first on presorted index arrays: every feature keeps
the node's samples in sorted order within a shared segment, and a split
stably partitions each segment, so a node costs O(n_features * n_node).
Split ties go to the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

LEAF = -1


@numba.njit(cache=True)
def _eval_feature(X, y, rows, order_f, lo, hi, f, min_leaf, mean, total):
    # returns (gain, threshold) of the best split on feature f, gain < 0 if none
    m = hi - lo
    best_gain = -1.0
    best_thr = 0.0
    s_left = 0.0
    for k in range(lo, hi - 1):
        r = rows[order_f[k]]
        s_left += y[r] - mean
        n_left = k - lo + 1
        n_right = m - n_left
        if n_left < min_leaf:
            continue
        if n_right < min_leaf:
            break
        v0 = X[r, f]
        v1 = X[rows[order_f[k + 1]], f]
        if not v0 < v1:
            continue
        s_right = total - s_left
        gain = s_left * s_left / n_left + s_right * s_right / n_right - total * total / m
        if gain > best_gain:
            best_gain = gain
            thr = v0 + (v1 - v0) / 2.0
            if not (v0 <= thr and thr < v1):
                thr = v0
            best_thr = thr
    return best_gain, best_thr


@numba.njit(cache=True)
def _build(X, y, rows, order, max_depth, min_leaf, max_features, seed):
    """Grow one tree on ``rows`` (indices into X/y, duplicates allowed).

    ``order[f]`` lists positions into ``rows`` sorted by X[rows, f].
    Returns (feature, threshold, left, right, value) node arrays.
    """
    np.random.seed(seed)
    p = X.shape[1]
    m_all = rows.shape[0]
    cap = 2 * m_all + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)

    goes_left = np.zeros(m_all, dtype=np.bool_)
    scratch = np.empty(m_all, dtype=np.int64)
    perm = np.arange(p)
    use_subset = max_features < p

    # stack of (node, lo, hi, depth)
    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    sp = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = m_all
    stack_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        lo = stack_lo[sp]
        hi = stack_hi[sp]
        depth = stack_depth[sp]
        m = hi - lo

        s = 0.0
        for k in range(lo, hi):
            s += y[rows[order[0, k]]]
        mean = s / m
        value[node] = mean
        ss = 0.0
        total = 0.0
        for k in range(lo, hi):
            d = y[rows[order[0, k]]] - mean
            ss += d * d
            total += d

        if (max_depth >= 0 and depth >= max_depth) or m < 2 * min_leaf or ss <= 0.0:
            continue

        best_gain = -1.0
        best_f = -1
        best_thr = 0.0
        n_candidates = p
        if use_subset:
            # partial Fisher-Yates: the first max_features entries of perm
            for i in range(p):
                perm[i] = i
            for i in range(max_features):
                j = i + np.random.randint(0, p - i)
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp
            chosen = np.sort(perm[:max_features])
            rest = np.sort(perm[max_features:])
            for f in chosen:
                g, t = _eval_feature(X, y, rows, order[f], lo, hi, f, min_leaf, mean, total)
                if g > best_gain:
                    best_gain, best_f, best_thr = g, f, t
            if best_gain <= 1e-12 * ss:
                # no usable split among the sampled features; fall back to the rest
                for f in rest:
                    g, t = _eval_feature(X, y, rows, order[f], lo, hi, f, min_leaf, mean, total)
                    if g > best_gain:
                        best_gain, best_f, best_thr = g, f, t
        else:
            for f in range(n_candidates):
                g, t = _eval_feature(X, y, rows, order[f], lo, hi, f, min_leaf, mean, total)
                if g > best_gain:
                    best_gain, best_f, best_thr = g, f, t

        if best_f < 0 or best_gain <= 1e-12 * ss:
            continue

        n_left = 0
        for k in range(lo, hi):
            pos = order[0, k]
            gl = X[rows[pos], best_f] <= best_thr
            goes_left[pos] = gl
            if gl:
                n_left += 1
        for f in range(p):
            a = lo
            b = 0
            for k in range(lo, hi):
                pos = order[f, k]
                if goes_left[pos]:
                    order[f, a] = pos
                    a += 1
                else:
                    scratch[b] = pos
                    b += 1
            for k in range(b):
                order[f, a + k] = scratch[k]

        feature[node] = best_f
        threshold[node] = best_thr
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # push right first so the left subtree is numbered first
        stack_node[sp] = rnode
        stack_lo[sp] = lo + n_left
        stack_hi[sp] = hi
        stack_depth[sp] = depth + 1
        sp += 1
        stack_node[sp] = lnode
        stack_lo[sp] = lo
        stack_hi[sp] = lo + n_left
        stack_depth[sp] = depth + 1
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@numba.njit(cache=True)
def _predict_tree(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def presort(X: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """order[f] = positions into ``rows`` sorted by X[rows, f] (stable)."""
    sub = X[rows]
    return np.ascontiguousarray(np.argsort(sub, axis=0, kind="stable").T.astype(np.int64))


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @classmethod
    def grow(cls, X, y, rows=None, *, max_depth=None, min_samples_leaf=1, max_features=None,
             seed=0, order=None) -> "Tree":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        if rows is None:
            rows = np.arange(X.shape[0], dtype=np.int64)
        rows = np.ascontiguousarray(rows, dtype=np.int64)
        if order is None:
            order = presort(X, rows)
        else:
            order = order.copy()
        p = X.shape[1]
        mf = p if max_features is None else int(max_features)
        parts = _build(X, y, rows, order, -1 if max_depth is None else int(max_depth),
                       int(min_samples_leaf), mf, int(seed) % (2 ** 32))
        return cls(*parts)

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _predict_tree(X, self.feature, self.threshold, self.left, self.right, self.value)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


class TreeEnsemble:
    """Sum or mean of trees: ``init + scale * combine(tree(x))``."""

    kind = "trees"

    def __init__(self, trees, init: float, scale: float, average: bool):
        self.trees = list(trees)
        self.init = float(init)
        self.scale = float(scale)
        self.average = bool(average)

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        acc = np.zeros(X.shape[0])
        for t in self.trees:
            acc += t.predict(X)
        if self.average:
            acc /= len(self.trees)
        return self.init + self.scale * acc

    def to_arrays(self) -> dict:
        sizes = np.array([t.n_nodes for t in self.trees], dtype=np.float64)
        cat = (lambda attr: np.concatenate([getattr(t, attr).astype(np.float64) for t in self.trees])
               if self.trees else np.zeros(0))
        return {
            "header": np.array([self.init, self.scale, float(self.average)]),
            "tree_sizes": sizes,
            "feature": cat("feature"),
            "threshold": cat("threshold"),
            "left": cat("left"),
            "right": cat("right"),
            "value": cat("value"),
        }

    @classmethod
    def from_arrays(cls, arrays: dict) -> "TreeEnsemble":
        init, scale, average = arrays["header"]
        trees = []
        start = 0
        for size in arrays["tree_sizes"].astype(np.int64):
            sl = slice(start, start + size)
            trees.append(Tree(arrays["feature"][sl].astype(np.int64), arrays["threshold"][sl].copy(),
                              arrays["left"][sl].astype(np.int64), arrays["right"][sl].astype(np.int64),
                              arrays["value"][sl].copy()))
            start += size
        return cls(trees, init, scale, bool(average))


def fit_random_forest(X, y, *, n_trees, max_depth, min_samples_leaf, subsample, seed):
    """Bootstrap-aggregated trees, ceil(p/3) candidate features per split."""
    n, p = X.shape
    rng = np.random.default_rng(seed)
    m = max(1, math.ceil(subsample * n))
    max_features = max(1, math.ceil(p / 3))
    trees = []
    for _ in range(n_trees):
        rows = np.sort(rng.integers(0, n, size=m))
        tree_seed = int(rng.integers(0, 2 ** 32))
        trees.append(Tree.grow(X, y, rows, max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                               max_features=max_features, seed=tree_seed))
    return TreeEnsemble(trees, 0.0, 1.0, average=True)


def fit_gradient_boosting(X, y, *, n_trees, max_depth, min_samples_leaf, learning_rate, subsample, seed):
    """Stagewise least-squares boosting. Returns (model, training MSE after each round)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    init = float(np.mean(y))
    F = np.full(n, init)
    all_rows = np.arange(n, dtype=np.int64)
    full_order = presort(X, all_rows) if subsample >= 1.0 else None
    m = max(1, math.ceil(subsample * n))
    trees = []
    losses = [float(np.mean((y - F) ** 2))]
    for _ in range(n_trees):
        resid = y - F
        if full_order is not None:
            tree = Tree.grow(X, resid, all_rows, max_depth=max_depth,
                             min_samples_leaf=min_samples_leaf, order=full_order)
        else:
            rows = np.sort(rng.choice(n, size=m, replace=False)).astype(np.int64)
            tree = Tree.grow(X, resid, rows, max_depth=max_depth, min_samples_leaf=min_samples_leaf)
        F = F + learning_rate * tree.predict(X)
        trees.append(tree)
        losses.append(float(np.mean((y - F) ** 2)))
    return TreeEnsemble(trees, init, learning_rate, average=False), losses
