"""Ranking evaluation: AUC, stratified cross-validation, unsupervised feature AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forest as forest_mod
from .errors import DataError


def auc(labels, scores) -> float:
    """Probability that a random positive outranks a random negative, ties at half.

    Computed by rank summation (average ranks on ties), which is exactly the
    pairwise win count P(s_pos > s_neg) + 0.5 P(s_pos = s_neg).
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise DataError("labels and scores must be aligned 1-D sequences")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be 0 or 1")
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    cum = np.cumsum(counts)
    avg_rank = cum - (counts - 1) / 2.0  # mean of the ranks occupied by each tie group
    ranks = avg_rank[inverse]
    r_pos = float(np.sum(ranks[labels == 1]))
    return (r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def stratified_folds(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold assignment with per-class counts balanced within one sample."""
    labels = np.asarray(labels)
    if folds < 2:
        raise DataError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    fold_id = np.empty(labels.size, dtype=np.int64)
    for cls in (0, 1):
        cls_idx = np.flatnonzero(labels == cls)
        perm = rng.permutation(cls_idx)
        for i, sample in enumerate(perm):
            fold_id[sample] = i % folds
    return fold_id


@dataclass
class CvResult:
    mean_auc: float
    fold_aucs: tuple[float, ...]

    @property
    def std_auc(self) -> float:
        return float(np.std(self.fold_aucs))


def cross_validate(pairs, table, folds: int = 5, seed: int = 0, n_trees: int = 100) -> CvResult:
    """Per-fold forest training and AUC on the held-out fold, stratified by label.

    Only pairs where the table's modality is available participate.
    """
    labels_all = np.asarray([p.label for p in pairs], dtype=np.int64)
    avail = np.asarray(table.available, dtype=bool)
    idx = np.flatnonzero(avail)
    if idx.size == 0:
        raise DataError(f"no pairs available for modality {table.modality}")
    y = labels_all[idx]
    X = table.values[idx]
    fold_id = stratified_folds(y, folds, seed)
    fold_aucs = []
    for f in range(folds):
        test = fold_id == f
        train = ~test
        if y[train].min() == y[train].max() or test.sum() == 0 or y[test].min() == y[test].max():
            raise DataError(f"fold {f} is single-class; not enough data for {folds}-fold CV")
        fseed = int(np.random.SeedSequence(entropy=(seed, f)).generate_state(1, np.uint32)[0])
        model = forest_mod.fit_arrays(X[train], y[train], n_trees=n_trees, seed=fseed)
        scores = forest_mod.posterior_many(model, X[test])
        fold_aucs.append(auc(y[test], scores))
    return CvResult(mean_auc=float(np.mean(fold_aucs)), fold_aucs=tuple(fold_aucs))


@dataclass
class OrientedAuc:
    auc: float
    inverted: bool  # True when low raw values indicate the friend class
    constant: bool  # True when the column carried no ranking signal


def unsupervised_feature_auc(pairs, table, column) -> OrientedAuc:
    """AUC of one raw feature column used directly as a score, orientation-corrected.

    Distance-like columns rank friends low; the returned value is
    max(AUC, 1 - AUC) with ``inverted`` flagging that the column was flipped.
    """
    labels_all = np.asarray([p.label for p in pairs], dtype=np.int64)
    idx = np.flatnonzero(np.asarray(table.available, dtype=bool))
    if idx.size == 0:
        raise DataError(f"no pairs available for modality {table.modality}")
    if isinstance(column, str):
        column = table.names.index(column)
    y = labels_all[idx]
    col = table.values[idx, column]
    if np.all(col == col[0]):
        return OrientedAuc(auc=0.5, inverted=False, constant=True)
    raw = auc(y, col)
    if raw >= 0.5:
        return OrientedAuc(auc=raw, inverted=False, constant=False)
    return OrientedAuc(auc=1.0 - raw, inverted=True, constant=False)
