from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .forest import ForestModel, ForestParams, predict_proba, train_forest, tree_rng

__all__ = [
    "roc_auc",
    "roc_curve",
    "stratified_kfold",
    "CvReport",
    "cross_validate",
    "AucComparison",
    "chisquare_auc_compare",
    "ImportanceReport",
    "oob_importance",
]


def _check_binary(labels):
    labels = np.asarray(labels).astype(np.int64)
    if not set(np.unique(labels)) <= {0, 1}:
        raise ValueError("labels must be 0/1")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise ValueError("both classes must be present")
    return labels, n_pos


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: ``P(score+ > score-) + 0.5 P(tie)``."""
    scores = np.asarray(scores, dtype=np.float64)
    labels, n_pos = _check_binary(labels)
    n_neg = labels.size - n_pos
    ranks = stats.rankdata(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels):
    """(fpr, tpr) points from the highest threshold down, starting at (0, 0)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels, n_pos = _check_binary(labels)
    n_neg = labels.size - n_pos
    thresholds = np.unique(scores)[::-1]
    tpr = [0.0] + [float(np.sum((scores >= t) & (labels == 1)) / n_pos) for t in thresholds]
    fpr = [0.0] + [float(np.sum((scores >= t) & (labels == 0)) / n_neg) for t in thresholds]
    return np.array(fpr), np.array(tpr)


def stratified_kfold(y, k: int = 5, seed: int = 0) -> np.ndarray:
    """Fold index per sample: per class, seeded shuffle then round-robin."""
    y = np.asarray(y)
    folds = np.empty(y.size, dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), 0xF01D]))
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < k:
            raise ValueError(f"class {cls} has {idx.size} members, fewer than k={k}")
        idx = rng.permutation(idx)
        folds[idx] = np.arange(idx.size) % k
    return folds


@dataclass(frozen=True, eq=False)
class CvReport:
    fold_aucs: np.ndarray
    mean_auc: float
    scores: np.ndarray  # out-of-fold class-1 probability per sample
    predicted: np.ndarray  # scores >= 0.5
    folds: np.ndarray


def cross_validate(X, y, params: ForestParams = ForestParams(), k: int = 5) -> CvReport:
    """Stratified k-fold; each held-out fold is scored by a forest fit on the rest."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    folds = stratified_kfold(y, k, params.seed)
    scores = np.full(y.size, np.nan)
    aucs = []
    for f in range(k):
        test = folds == f
        model = train_forest(X[~test], y[~test], params)
        scores[test] = predict_proba(model, X[test])
        aucs.append(roc_auc(scores[test], y[test]))
    aucs = np.array(aucs)
    return CvReport(aucs, float(aucs.mean()), scores, (scores >= 0.5).astype(np.int64), folds)


@dataclass(frozen=True)
class AucComparison:
    chi2: float
    p_value: float
    table: tuple[tuple[int, int], tuple[int, int]]  # rows: A correct/wrong, cols: B correct/wrong
    warning: str | None


def chisquare_auc_compare(preds_a, preds_b, labels) -> AucComparison:
    """Chi-square test on the paired correctness table of two classifiers.

    Only the discordant cells (one correct, the other wrong) carry evidence;
    under the null they are equally likely, so the statistic is the Pearson
    chi-square of those two cells against their common expectation, with one
    degree of freedom.
    """
    a = np.asarray(preds_a).astype(np.int64)
    b = np.asarray(preds_b).astype(np.int64)
    labels = np.asarray(labels).astype(np.int64)
    if not a.size == b.size == labels.size:
        raise ValueError("prediction and label vectors must have equal length")
    ca = a == labels
    cb = b == labels
    table = (
        (int(np.sum(ca & cb)), int(np.sum(ca & ~cb))),
        (int(np.sum(~ca & cb)), int(np.sum(~ca & ~cb))),
    )
    n01, n10 = table[0][1], table[1][0]
    discordant = n01 + n10
    if discordant == 0:
        return AucComparison(0.0, 1.0, table, "no discordant pairs; test is degenerate")
    chi2 = (n01 - n10) ** 2 / discordant
    warning = None
    if discordant / 2 < 5:
        warning = f"expected discordant count {discordant / 2:g} < 5; chi-square approximation unreliable"
    return AucComparison(float(chi2), float(stats.chi2.sf(chi2, 1)), table, warning)


@dataclass(frozen=True, eq=False)
class ImportanceReport:
    importance: np.ndarray  # mean per-tree accuracy drop / its std over trees
    raw_mean: np.ndarray
    raw_std: np.ndarray
    n_trees_used: int

    @property
    def predictive(self) -> np.ndarray:
        return self.importance > 0


def oob_importance(model: ForestModel, X, y) -> ImportanceReport:
    """Normalized out-of-bag permutation importance.

    For every tree and feature: OOB accuracy minus OOB accuracy after a seeded
    permutation of that feature's OOB column. Trees with an empty OOB set are
    skipped. The per-feature mean over trees is divided by the standard
    deviation over trees (0/0 -> 0).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    p = model.n_features
    deltas = []
    for t, (tree, oob) in enumerate(zip(model.trees, model.oob)):
        if oob.size == 0:
            continue
        rng = tree_rng(model.params.seed, t, stream=1)
        Xo = X[oob]
        yo = y[oob]
        base = np.mean((tree.predict_proba(Xo) >= 0.5) == yo)
        row = np.zeros(p)
        perms = rng.permuted(np.tile(np.arange(oob.size), (p, 1)), axis=1)
        # Features absent from the tree cannot change its output; skip them.
        for f in tree.used_features:
            Xp = Xo.copy()
            Xp[:, f] = Xo[perms[f], f]
            row[f] = base - np.mean((tree.predict_proba(Xp) >= 0.5) == yo)
        deltas.append(row)
    if not deltas:
        zeros = np.zeros(p)
        return ImportanceReport(zeros, zeros, zeros, 0)
    deltas = np.array(deltas)
    mean = deltas.mean(axis=0)
    std = deltas.std(axis=0)
    imp = np.divide(mean, std, out=np.zeros(p), where=std > 0)
    return ImportanceReport(imp, mean, std, len(deltas))
