"""Random-forest classifier for binary labels, grown from scratch.

Trees are CART with Gini impurity. Each tree owns a random stream seeded from
``(seed, tree_index)`` so a forest is reproducible regardless of how the
trees are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import ShapeError, TrainingError

LEAF = -1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 500
    mtry: int | None = None  # None -> ceil(sqrt(n_features))
    min_leaf: int = 1
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")

    def resolved_mtry(self, n_features: int) -> int:
        m = self.mtry if self.mtry is not None else math.ceil(math.sqrt(n_features))
        if not 1 <= m <= n_features:
            raise ValueError(f"mtry={m} outside [1, {n_features}]")
        return m


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat node arrays; ``feature[k] == LEAF`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # class-1 probability at each node

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] != LEAF
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return node

    def predict_proba(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def used_features(self) -> np.ndarray:
        return np.unique(self.feature[self.feature != LEAF])


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[Tree, ...]
    oob: tuple[np.ndarray, ...]  # per tree, sorted indices never drawn in its bootstrap
    params: ForestParams
    n_features: int


def tree_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for tree ``index``; ``stream`` separates uses."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), index, stream]))


@njit(cache=True)
def _grow(X, y, keys, mtry, min_leaf, max_depth):
    """CART growth on bootstrap rows ``X``/``y``.

    Row ``keys[k]`` holds uniforms whose ``mtry`` smallest entries pick the
    features tried at the ``k``-th node considered for splitting. Among equal
    impurities the lowest feature index, then the lowest threshold, wins.
    """
    n, p = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros(cap)
    perm = np.arange(n)
    # Stack rows: node, start, end, depth.
    stack = np.zeros((cap, 4), dtype=np.int64)
    value[0] = y.mean()
    n_nodes = 1
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_draws = 0
    xs = np.empty(n)
    ys = np.empty(n, dtype=np.int64)
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start
        ones = 0
        for r in range(start, end):
            ones += y[perm[r]]
        if ones == 0 or ones == m or m < 2 * min_leaf:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue
        feats = np.sort(np.argsort(keys[n_draws])[:mtry])
        n_draws += 1

        best_score = np.inf
        best_f = -1
        best_thr = 0.0
        for f in feats:
            for r in range(m):
                xs[r] = X[perm[start + r], f]
            order = np.argsort(xs[:m], kind="mergesort")
            for r in range(m):
                ys[r] = y[perm[start + order[r]]]
            ol = 0
            for k in range(m - 1):
                ol += ys[k]
                nl = k + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                a = xs[order[k]]
                b = xs[order[k + 1]]
                if not b > a:
                    continue
                orr = ones - ol
                g = (nl - (ol * ol + (nl - ol) * (nl - ol)) / nl) + (
                    nr - (orr * orr + (nr - orr) * (nr - orr)) / nr
                )
                if g < best_score:
                    best_score = g
                    best_f = f
                    best_thr = 0.5 * (a + b)
        if best_f < 0:
            continue

        # Partition perm[start:end] so rows going left come first.
        i = start
        j = end - 1
        while i <= j:
            if X[perm[i], best_f] <= best_thr:
                i += 1
            else:
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp
                j -= 1
        mid = i
        ln = n_nodes
        rn = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = ln
        right[node] = rn
        s = 0.0
        for r in range(start, mid):
            s += y[perm[r]]
        value[ln] = s / (mid - start)
        s = 0.0
        for r in range(mid, end):
            s += y[perm[r]]
        value[rn] = s / (end - mid)
        stack[top, 0] = rn
        stack[top, 1] = mid
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        stack[top + 1, 0] = ln
        stack[top + 1, 1] = start
        stack[top + 1, 2] = mid
        stack[top + 1, 3] = depth + 1
        top += 2
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


def grow_tree(X, y, rng, mtry, min_leaf=1, max_depth=None) -> Tree:
    n, p = X.shape
    # A tree on n rows has at most 2n - 1 nodes, so at most that many split attempts.
    keys = rng.random((2 * n, p))
    arrays = _grow(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.int64),
        keys,
        int(mtry),
        int(min_leaf),
        -1 if max_depth is None else int(max_depth),
    )
    return Tree(*arrays)


def train_forest(X, y, params: ForestParams = ForestParams()) -> ForestModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeError(f"X {X.shape} and y {y.shape} do not align")
    if not np.all(np.isfinite(X)):
        raise TrainingError("X contains missing or non-finite values")
    if not set(np.unique(y)) <= {0, 1}:
        raise TrainingError("labels must be 0/1")
    if len(np.unique(y)) < 2:
        raise TrainingError("both classes must be present to train")
    n, p = X.shape
    mtry = params.resolved_mtry(p)

    trees, oobs = [], []
    for t in range(params.n_trees):
        rng = tree_rng(params.seed, t)
        boot = rng.integers(0, n, size=n)
        trees.append(grow_tree(X[boot], y[boot], rng, mtry, params.min_leaf, params.max_depth))
        drawn = np.zeros(n, dtype=bool)
        drawn[boot] = True
        oobs.append(np.flatnonzero(~drawn))
    return ForestModel(tuple(trees), tuple(oobs), params, p)


def predict_proba(model: ForestModel, X) -> np.ndarray:
    """Mean over trees of the leaf class-1 probability."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(f"expected {model.n_features} features, got shape {X.shape}")
    total = np.zeros(len(X))
    for tree in model.trees:
        total += tree.predict_proba(X)
    return total / len(model.trees)


def predict(model: ForestModel, X, threshold: float = 0.5) -> np.ndarray:
    return (predict_proba(model, X) >= threshold).astype(np.int64)


def oob_accuracy(model: ForestModel, X, y) -> float:
    """Accuracy of OOB-aggregated votes over samples that are OOB for some tree."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    total = np.zeros(len(y))
    count = np.zeros(len(y))
    for tree, oob in zip(model.trees, model.oob):
        if oob.size:
            total[oob] += tree.predict_proba(X[oob])
            count[oob] += 1
    seen = count > 0
    pred = (total[seen] / count[seen]) >= 0.5
    return float(np.mean(pred == y[seen]))


def save_forest(model: ForestModel, path) -> None:
    """Write a round-trippable text dump of every tree and its OOB set."""
    p = model.params
    lines = [
        "drfkit-forest 1",
        f"params n_trees={p.n_trees} mtry={p.mtry} min_leaf={p.min_leaf} max_depth={p.max_depth} seed={p.seed}",
        f"n_features {model.n_features}",
    ]
    for k, (tree, oob) in enumerate(zip(model.trees, model.oob)):
        lines.append(f"tree {k} {len(tree.feature)}")
        for f, t, l, r, v in zip(tree.feature, tree.threshold, tree.left, tree.right, tree.value):
            lines.append(f"{f} {float(t)!r} {l} {r} {float(v)!r}")
        lines.append("oob " + " ".join(str(i) for i in oob))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_forest(path) -> ForestModel:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "drfkit-forest 1":
        raise ValueError(f"{path}: not a forest dump")

    def opt_int(v):
        return None if v == "None" else int(v)

    kv = dict(item.split("=") for item in lines[1].split()[1:])
    params = ForestParams(
        n_trees=int(kv["n_trees"]),
        mtry=opt_int(kv["mtry"]),
        min_leaf=int(kv["min_leaf"]),
        max_depth=opt_int(kv["max_depth"]),
        seed=int(kv["seed"]),
    )
    n_features = int(lines[2].split()[1])
    trees, oobs = [], []
    pos = 3
    while pos < len(lines):
        n_nodes = int(lines[pos].split()[2])
        rows = [ln.split() for ln in lines[pos + 1 : pos + 1 + n_nodes]]
        trees.append(
            Tree(
                np.array([int(r[0]) for r in rows], dtype=np.int64),
                np.array([float(r[1]) for r in rows]),
                np.array([int(r[2]) for r in rows], dtype=np.int64),
                np.array([int(r[3]) for r in rows], dtype=np.int64),
                np.array([float(r[4]) for r in rows]),
            )
        )
        oobs.append(np.array([int(i) for i in lines[pos + 1 + n_nodes].split()[1:]], dtype=np.int64))
        pos += n_nodes + 2
    return ForestModel(tuple(trees), tuple(oobs), params, n_features)
