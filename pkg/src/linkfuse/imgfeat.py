"""Image features from precomputed scene-category probability vectors.

No model inference happens here: each post may carry a sparse probability
vector over scene categories produced upstream. An image counts toward a
category when that probability reaches the significance threshold (default
5%); probabilities below the threshold are treated as exactly zero
everywhere, including the per-category usage sums.

A pair's feature vector concatenates the category-wise minimum of the two
users' image counts, the cosine of the count vectors, the frequency of the
mutually most shared category, and the usage entropy of that category.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, PairSample
from .distances import cosine
from .errors import DataError
from .tables import FeatureTable
from .tagfeat import entropy_bits

DEFAULT_THRESHOLD = 0.05
DEFAULT_CATEGORIES = 365


def image_feature_names(n_categories: int = DEFAULT_CATEGORIES) -> tuple[str, ...]:
    width = len(str(n_categories - 1))
    return tuple(f"min_count_{c:0{width}d}" for c in range(n_categories)) + (
        "x_cosine",
        "x_F_maxcat",
        "x_E_maxcat",
    )


@dataclass
class CategoryIndex:
    n_categories: int
    threshold: float
    users: tuple[int, ...]  # users with at least one image, row order of usage
    counts: dict[int, np.ndarray]  # user -> per-category image count (int64)
    usage: np.ndarray  # (n_categories, n_users) summed past-threshold probabilities


def build_category_index(d: Dataset, threshold: float = DEFAULT_THRESHOLD,
                         n_categories: int = DEFAULT_CATEGORIES) -> CategoryIndex:
    """Count per-user images per category and sum the surviving probabilities.

    An image belongs to category c iff its probability for c is >= threshold.
    Users with images but no probability above the threshold keep an all-zero
    count vector (they still have the modality).
    """
    users = tuple(sorted(u for u, n in d.image_counts.items() if n > 0))
    row_of = {u: i for i, u in enumerate(users)}
    counts = {u: np.zeros(n_categories, dtype=np.int64) for u in users}
    usage = np.zeros((n_categories, len(users)), dtype=np.float64)
    for p in d.posts:
        if p.image_probs is None:
            continue
        i = row_of[p.author]
        for c, prob in p.image_probs:
            if c >= n_categories:
                raise DataError(f"post {p.post_id}: image category {c} outside 0..{n_categories - 1}")
            if prob >= threshold:
                counts[p.author][c] += 1
                usage[c, i] += prob
    return CategoryIndex(
        n_categories=n_categories,
        threshold=threshold,
        users=users,
        counts=counts,
        usage=usage,
    )


def image_features(idx: CategoryIndex, pair: PairSample) -> np.ndarray:
    """Concatenated (min_count..., x_cosine, x_F_maxcat, x_E_maxcat) vector.

    The mutually most shared category is the argmax of min_count with the
    lowest index winning ties; when no category is shared at all the entropy
    term is defined as 0.
    """
    nu = idx.counts.get(pair.u)
    nv = idx.counts.get(pair.v)
    if nu is None or nv is None:
        raise DataError(f"pair ({pair.u}, {pair.v}) lacks images; image modality unavailable")
    min_count = np.minimum(nu, nv)
    x_cosine = cosine(nu.astype(np.float64), nv.astype(np.float64))
    x_f_maxcat = float(min_count.max())
    if x_f_maxcat > 0.0:
        maxcat = int(min_count.argmax())  # argmax takes the first (lowest) index on ties
        x_e_maxcat = entropy_bits(idx.usage[maxcat])
    else:
        x_e_maxcat = 0.0
    return np.concatenate([
        min_count.astype(np.float64),
        [x_cosine, x_f_maxcat, x_e_maxcat],
    ])


def image_feature_table(idx: CategoryIndex, pairs) -> FeatureTable:
    names = image_feature_names(idx.n_categories)
    values = np.zeros((len(pairs), len(names)), dtype=np.float64)
    available = np.zeros(len(pairs), dtype=bool)
    for i, p in enumerate(pairs):
        if p.avail["I"]:
            values[i] = image_features(idx, p)
            available[i] = True
    return FeatureTable("I", names, values, available)
