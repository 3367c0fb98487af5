"""Attack robustness against users deleting a share of their posts.

For each removal fraction the harness drops that share of the raw posts
uniformly at random, re-runs the preprocessing filters, rebuilds the pair
samples, recomputes the hashtag / text / image features, retrains and scores
each attack, and also scores the fused attack over those three modalities.
Results are averaged over several removal seeds because a single removal draw
is noisy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import imgfeat, tagfeat, textfeat
from .dataset import Dataset, build_pairs, make_dataset, preprocess
from .errors import ConfigError, DataError
from .evaluate import cross_validate
from .fusion import fit_fusion, score_rows
from .tables import FeatureTable

MAX_REMOVAL_FRACTION = 0.9
DEFAULT_FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5)
ATTACKS = ("H", "T", "I", "fusion_HTI")


def remove_posts(d: Dataset, fraction: float, seed: int) -> Dataset:
    """Drop exactly floor(fraction * n_posts) posts, chosen uniformly."""
    if not 0.0 <= fraction <= MAX_REMOVAL_FRACTION:
        raise ConfigError(
            f"removal fraction {fraction} outside configured range [0, {MAX_REMOVAL_FRACTION}]"
        )
    n = len(d.posts)
    n_remove = math.floor(fraction * n)
    if n_remove == 0:
        return d
    rng = np.random.default_rng(seed)
    drop = set(rng.choice(n, size=n_remove, replace=False).tolist())
    posts = tuple(p for i, p in enumerate(d.posts) if i not in drop)
    return make_dataset(d.users, posts, d.edges)


def _single_split_fusion_auc(pairs, tables, subset, inner_split, n_trees, seed) -> float:
    """The target-set protocol: one stratified 80/20 outer split, fused AUC on the 20%."""
    from .evaluate import auc, stratified_folds

    labels = np.asarray([p.label for p in pairs], dtype=np.int64)
    scorable = np.zeros(labels.size, dtype=bool)
    for mod in subset:
        if mod in tables:
            scorable |= np.asarray(tables[mod].available, dtype=bool)
    idx = np.flatnonzero(scorable)
    if idx.size == 0:
        raise DataError(f"no pair carries any modality from subset {subset}")
    fold_id = stratified_folds(labels[idx], 5, seed)
    test_rows = idx[fold_id == 0]  # one 80/20 split off the same fold machinery
    train_rows = idx[fold_id != 0]
    train_pairs = [pairs[i] for i in train_rows]
    sub_tables = {
        mod: FeatureTable(mod, tables[mod].names, tables[mod].values[train_rows],
                          np.asarray(tables[mod].available)[train_rows])
        for mod in subset if mod in tables
    }
    model = fit_fusion(train_pairs, sub_tables, inner_split=inner_split,
                       n_trees=n_trees, seed=seed)
    scores, ok = score_rows(model, tables, test_rows, subset=subset, weighted=True)
    y = labels[test_rows[ok]]
    if y.size == 0 or y.min() == y.max():
        raise DataError("fusion target set is single-class")
    return auc(y, scores[ok])


def _run_once(d_raw: Dataset, fraction: float, removal_seed: int, pair_seed: int,
              eval_seed: int, folds: int, n_trees: int, inner_split: float,
              image_threshold: float, n_categories: int,
              filter_kwargs: dict, pair_kwargs: dict) -> dict[str, float]:
    reduced = remove_posts(d_raw, fraction, removal_seed)
    snap = preprocess(reduced, **filter_kwargs)
    pairs = build_pairs(snap, pair_seed, **pair_kwargs)
    results: dict[str, float] = {}
    tables: dict[str, FeatureTable] = {}
    try:
        tables["H"] = tagfeat.hashtag_feature_table(tagfeat.build_hashtag_index(snap), pairs)
    except DataError:
        pass
    try:
        tables["T"] = textfeat.text_feature_table(textfeat.tfidf(snap), pairs)
    except DataError:
        pass
    try:
        idx = imgfeat.build_category_index(snap, image_threshold, n_categories)
        tables["I"] = imgfeat.image_feature_table(idx, pairs)
    except DataError:
        pass
    for mod in ("H", "T", "I"):
        try:
            results[mod] = cross_validate(pairs, tables[mod], folds=folds,
                                          seed=eval_seed, n_trees=n_trees).mean_auc
        except (DataError, KeyError):
            results[mod] = float("nan")
    try:
        results["fusion_HTI"] = _single_split_fusion_auc(
            pairs, tables, ("H", "T", "I"), inner_split, n_trees, eval_seed,
        )
    except DataError:
        results["fusion_HTI"] = float("nan")
    return results


@dataclass
class RobustnessCell:
    fraction: float
    attack: str
    mean_auc: float  # NaN when the attack had no data at this fraction
    std_auc: float
    n_runs: int


def robustness_sweep(d_raw: Dataset, removal_fractions=DEFAULT_FRACTIONS,
                     seed: int = 0, pair_seed: int = 0, n_removal_seeds: int = 3,
                     folds: int = 5, n_trees: int = 100, inner_split: float = 0.8,
                     image_threshold: float = 0.05, n_categories: int = 365,
                     include_reference: bool = True,
                     filter_kwargs: dict | None = None,
                     pair_kwargs: dict | None = None) -> list[RobustnessCell]:
    """AUC of the hashtag / text / image attacks and their fused subset across
    removal fractions; a zero-removal reference row is prepended by default.

    ``filter_kwargs`` / ``pair_kwargs`` forward custom preprocessing and pair
    sampling parameters so the sweep replays the exact ingest pipeline.
    """
    filter_kwargs = filter_kwargs or {}
    pair_kwargs = pair_kwargs or {}
    fractions = list(removal_fractions)
    for f in fractions:
        if not 0.0 <= f <= MAX_REMOVAL_FRACTION:
            raise ConfigError(
                f"removal fraction {f} outside configured range [0, {MAX_REMOVAL_FRACTION}]"
            )
    if include_reference and 0.0 not in fractions:
        fractions = [0.0] + fractions

    cells: list[RobustnessCell] = []
    for fraction in fractions:
        per_attack: dict[str, list[float]] = {a: [] for a in ATTACKS}
        # removal draws only differ when something is actually removed
        seeds = [seed] if fraction == 0.0 else [
            int(np.random.SeedSequence(entropy=(seed, r)).generate_state(1, np.uint32)[0])
            for r in range(n_removal_seeds)
        ]
        for removal_seed in seeds:
            run = _run_once(d_raw, fraction, removal_seed, pair_seed, seed,
                            folds, n_trees, inner_split, image_threshold,
                            n_categories, filter_kwargs, pair_kwargs)
            for attack in ATTACKS:
                per_attack[attack].append(run[attack])
        for attack in ATTACKS:
            vals = np.asarray(per_attack[attack], dtype=np.float64)
            ok = ~np.isnan(vals)
            if ok.any():
                cells.append(RobustnessCell(fraction, attack, float(vals[ok].mean()),
                                            float(vals[ok].std()), int(ok.sum())))
            else:
                cells.append(RobustnessCell(fraction, attack, float("nan"), float("nan"), 0))
    return cells
