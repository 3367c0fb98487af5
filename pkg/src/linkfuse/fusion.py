"""Confidence-weighted late fusion of the per-modality classifiers.

Training splits the labelled pairs into an inner train/held-out part, fits
one forest per modality on the first part, and scores each forest's held-out
AUC as its confidence. A pair's fused score is the average of its available
modality posteriors weighted by normalized confidences; the unweighted mean
is kept as a baseline. Restricting the modality set yields the subset
variants.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping

import numpy as np

from . import forest as forest_mod
from .dataset import MODALITIES
from .errors import ConfigError, DataError
from .evaluate import auc, stratified_folds
from .tables import FeatureTable

log = logging.getLogger(__name__)


@dataclass
class FusionModel:
    forests: dict[str, forest_mod.Forest]
    confidences: dict[str, float]
    inner_split: float
    seed: int
    dropped: tuple[str, ...]

    @property
    def modalities(self) -> tuple[str, ...]:
        return tuple(m for m in MODALITIES if m in self.forests)


def _inner_split_mask(labels: np.ndarray, inner_split: float, seed: int) -> np.ndarray:
    """Stratified boolean mask: True rows train the forests, False rows score them."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0)))
    mask = np.zeros(labels.size, dtype=bool)
    for cls in (0, 1):
        cls_idx = np.flatnonzero(labels == cls)
        perm = rng.permutation(cls_idx)
        n_train = int(round(inner_split * cls_idx.size))
        mask[perm[:n_train]] = True
    return mask


def fit_fusion(pairs, tables: Mapping[str, FeatureTable], inner_split: float = 0.8,
               n_trees: int = 100, seed: int = 0) -> FusionModel:
    """Fit per-modality forests and their held-out-AUC confidences.

    A modality with no usable training rows (or whose held-out slice cannot
    produce an AUC) is dropped with a warning rather than guessed at.
    """
    if not 0.0 < inner_split < 1.0:
        raise ConfigError(f"inner_split must be in (0, 1), got {inner_split}")
    labels = np.asarray([p.label for p in pairs], dtype=np.int64)
    train_mask = _inner_split_mask(labels, inner_split, seed)

    forests: dict[str, forest_mod.Forest] = {}
    confidences: dict[str, float] = {}
    dropped: list[str] = []
    for k, mod in enumerate(MODALITIES):
        table = tables.get(mod)
        if table is None:
            continue
        avail = np.asarray(table.available, dtype=bool)
        tt = avail & train_mask
        tv = avail & ~train_mask
        y_tt = labels[tt]
        if y_tt.size < 2 or y_tt.min() == y_tt.max():
            log.warning("fusion: dropping modality %s (unusable training slice)", mod)
            dropped.append(mod)
            continue
        y_tv = labels[tv]
        if y_tv.size == 0 or y_tv.min() == y_tv.max():
            log.warning("fusion: dropping modality %s (held-out slice cannot score an AUC)", mod)
            dropped.append(mod)
            continue
        fseed = int(np.random.SeedSequence(entropy=(seed, 1, k)).generate_state(1, np.uint32)[0])
        model = forest_mod.fit_arrays(table.values[tt], y_tt, n_trees=n_trees, seed=fseed)
        confidences[mod] = auc(y_tv, forest_mod.posterior_many(model, table.values[tv]))
        forests[mod] = model
    if not forests:
        raise DataError("fusion has no trainable modality")
    return FusionModel(forests=forests, confidences=confidences,
                       inner_split=inner_split, seed=seed, dropped=tuple(dropped))


def fuse_scores(posteriors: Mapping[str, float], confidences: Mapping[str, float],
                subset=MODALITIES) -> float | None:
    """Confidence-weighted average of the posteriors available in ``subset``.

    Returns None when no subset modality is available. Weights renormalize
    over the pair's available modalities, so scaling every confidence by the
    same positive constant changes nothing. If the available confidences sum
    to zero the plain mean is used.
    """
    avail = [m for m in subset if m in posteriors]
    if not avail:
        return None
    if len(avail) == 1:  # degenerate subset: exactly the monomodal posterior
        return posteriors[avail[0]]
    total = sum(confidences[m] for m in avail)
    if total == 0.0:
        return float(np.mean([posteriors[m] for m in avail]))
    return sum(posteriors[m] * confidences[m] for m in avail) / total


def model_posteriors(model: FusionModel, tables: Mapping[str, FeatureTable], i: int) -> dict[str, float]:
    """Per-modality friend posteriors for pair row ``i`` (available ones only)."""
    out: dict[str, float] = {}
    for mod, fr in model.forests.items():
        table = tables[mod]
        if table.available[i]:
            out[mod] = forest_mod.posterior(fr, table.values[i])
    return out


def score_multimodal(model: FusionModel, tables: Mapping[str, FeatureTable], i: int,
                     subset=MODALITIES) -> float | None:
    """Fused score for pair row ``i`` over ``subset``; None when unscorable."""
    subset = tuple(subset)
    unknown = [m for m in subset if m not in MODALITIES]
    if not subset or unknown:
        raise DataError(f"invalid modality subset {subset}")
    return fuse_scores(model_posteriors(model, tables, i), model.confidences, subset)


def score_baseline(model: FusionModel, tables: Mapping[str, FeatureTable], i: int,
                   subset=MODALITIES) -> float | None:
    """Unweighted mean of the available posteriors; None when unscorable."""
    posteriors = model_posteriors(model, tables, i)
    avail = [m for m in subset if m in posteriors]
    if not avail:
        return None
    return float(np.mean([posteriors[m] for m in avail]))


def posterior_columns(model: FusionModel, tables: Mapping[str, FeatureTable],
                      rows: np.ndarray) -> dict[str, np.ndarray]:
    """Batch per-modality posteriors for the given pair rows; NaN marks unavailable."""
    out: dict[str, np.ndarray] = {}
    for mod, fr in model.forests.items():
        table = tables[mod]
        col = np.full(rows.size, np.nan)
        avail_rows = np.asarray(table.available, dtype=bool)[rows]
        if avail_rows.any():
            col[avail_rows] = forest_mod.posterior_many(fr, table.values[rows[avail_rows]])
        out[mod] = col
    return out


def score_rows(model: FusionModel, tables: Mapping[str, FeatureTable], rows: np.ndarray,
               subset=MODALITIES, weighted: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized fused (or baseline) scores; the second array masks scorable rows."""
    subset = tuple(m for m in subset if m in model.forests)
    cols = posterior_columns(model, tables, rows)
    if len(subset) == 1:  # degenerate subset: exactly the monomodal posterior
        col = cols[subset[0]]
        ok = ~np.isnan(col)
        return np.where(ok, col, 0.0), ok
    num = np.zeros(rows.size)
    den = np.zeros(rows.size)
    mean_num = np.zeros(rows.size)
    mean_den = np.zeros(rows.size)
    for mod in subset:
        col = cols[mod]
        ok = ~np.isnan(col)
        w = model.confidences[mod] if weighted else 1.0
        num[ok] += col[ok] * w
        den[ok] += w
        mean_num[ok] += col[ok]
        mean_den[ok] += 1.0
    scorable = mean_den > 0
    scores = np.zeros(rows.size)
    # fall back to the plain mean where every confidence is zero
    weighted_ok = scorable & (den > 0)
    scores[weighted_ok] = num[weighted_ok] / den[weighted_ok]
    mean_only = scorable & (den == 0)
    scores[mean_only] = mean_num[mean_only] / mean_den[mean_only]
    return scores, scorable


def enumerate_subsets() -> tuple[tuple[str, ...], ...]:
    """Every modality subset of interest in canonical order: the five
    singletons, all 25 subsets of size two to four, then the full set."""
    out: list[tuple[str, ...]] = []
    for size in range(1, len(MODALITIES) + 1):
        out.extend(combinations(MODALITIES, size))
    return tuple(out)


@dataclass
class FusionEval:
    subset: tuple[str, ...]
    fold_aucs: tuple[float, ...]
    baseline_fold_aucs: tuple[float, ...]
    unscorable: int
    skipped_folds: int = 0

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.fold_aucs))

    @property
    def baseline_mean_auc(self) -> float:
        return float(np.mean(self.baseline_fold_aucs))


@dataclass
class FusionScores:
    """Per-pair scores collected from the fold where each pair was held out.

    Arrays align with the input pair list; NaN marks pairs that never landed
    in a scorable held-out slice.
    """

    posteriors: dict[str, np.ndarray]
    fused: np.ndarray
    baseline: np.ndarray
    subset_scores: dict[tuple[str, ...], np.ndarray]


def evaluate_fusion_subsets(pairs, tables: Mapping[str, FeatureTable], subsets,
                            folds: int = 5, inner_split: float = 0.8,
                            n_trees: int = 100, seed: int = 0,
                            ) -> tuple[dict[tuple[str, ...], FusionEval], FusionScores]:
    """Outer cross-validation of the fused scores for many subsets at once.

    Each fold fits the five classifiers and their confidences once on its
    training part; every requested subset then reweights the same held-out
    posteriors, mirroring how the subset adversaries reuse the trained
    classifiers. A fold where some subset has no scorable pairs or a single
    class is skipped for that subset only.
    """
    subsets = [tuple(s) for s in subsets]
    for subset in subsets:
        bad = [m for m in subset if m not in MODALITIES]
        if not subset or bad:
            raise DataError(f"invalid modality subset {subset}")
    labels = np.asarray([p.label for p in pairs], dtype=np.int64)
    scorable_any = np.zeros(labels.size, dtype=bool)
    for mod, table in tables.items():
        scorable_any |= np.asarray(table.available, dtype=bool)
    idx = np.flatnonzero(scorable_any)
    if idx.size == 0:
        raise DataError("no pair carries any available modality")
    fold_id = stratified_folds(labels[idx], folds, seed)

    n_pairs = labels.size
    posteriors = {m: np.full(n_pairs, np.nan) for m in tables}
    fused_all = np.full(n_pairs, np.nan)
    baseline_all = np.full(n_pairs, np.nan)
    per_subset_scores = {s: np.full(n_pairs, np.nan) for s in subsets}
    per_subset_aucs: dict[tuple[str, ...], list[float]] = {s: [] for s in subsets}
    per_subset_base: dict[tuple[str, ...], list[float]] = {s: [] for s in subsets}
    per_subset_skips = {s: 0 for s in subsets}
    unscorable = 0

    for f in range(folds):
        test_rows = idx[fold_id == f]
        train_rows = idx[fold_id != f]
        train_pairs = [pairs[i] for i in train_rows]
        sub_tables = {
            mod: FeatureTable(mod, table.names, table.values[train_rows],
                              np.asarray(table.available)[train_rows])
            for mod, table in tables.items()
        }
        fseed = int(np.random.SeedSequence(entropy=(seed, 3, f)).generate_state(1, np.uint32)[0])
        model = fit_fusion(train_pairs, sub_tables, inner_split=inner_split,
                           n_trees=n_trees, seed=fseed)
        cols = posterior_columns(model, tables, test_rows)
        for mod, col in cols.items():
            posteriors[mod][test_rows] = col
        full_scores, full_ok = score_rows(model, tables, test_rows, weighted=True)
        base_scores, _ = score_rows(model, tables, test_rows, weighted=False)
        fused_all[test_rows[full_ok]] = full_scores[full_ok]
        baseline_all[test_rows[full_ok]] = base_scores[full_ok]
        unscorable += int((~full_ok).sum())

        for subset in subsets:
            scores, ok = score_rows(model, tables, test_rows, subset=subset,
                                    weighted=True)
            sub_base, _ = score_rows(model, tables, test_rows, subset=subset,
                                     weighted=False)
            per_subset_scores[subset][test_rows[ok]] = scores[ok]
            y = labels[test_rows[ok]]
            if y.size == 0 or y.min() == y.max():
                per_subset_skips[subset] += 1
                continue
            per_subset_aucs[subset].append(auc(y, scores[ok]))
            per_subset_base[subset].append(auc(y, sub_base[ok]))

    evals = {}
    for subset in subsets:
        if not per_subset_aucs[subset]:
            raise DataError(f"subset {''.join(subset)} was never scorable with both classes")
        evals[subset] = FusionEval(
            subset=subset,
            fold_aucs=tuple(per_subset_aucs[subset]),
            baseline_fold_aucs=tuple(per_subset_base[subset]),
            unscorable=unscorable,
            skipped_folds=per_subset_skips[subset],
        )
    scores = FusionScores(posteriors=posteriors, fused=fused_all,
                          baseline=baseline_all, subset_scores=per_subset_scores)
    return evals, scores


def evaluate_fusion(pairs, tables: Mapping[str, FeatureTable], subset=MODALITIES,
                    folds: int = 5, inner_split: float = 0.8, n_trees: int = 100,
                    seed: int = 0) -> FusionEval:
    """Outer cross-validation of the fused score over one subset."""
    subset = tuple(subset)
    sub_tables = {m: t for m, t in tables.items() if m in subset}
    if not sub_tables:
        raise DataError(f"no feature tables for subset {subset}")
    evals, _ = evaluate_fusion_subsets(pairs, sub_tables, [subset], folds=folds,
                                       inner_split=inner_split, n_trees=n_trees,
                                       seed=seed)
    return evals[subset]
