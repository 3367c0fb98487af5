"""Ten hashtag features for a user pair, built on per-hashtag usage entropy.

The first six features score the overlap of two users' hashtag sets and usage
counts (common count, Jaccard fraction, dot product, cosine, minimum global
popularity, Adamic-Adar over log popularity). The last four weight shared
hashtags by how concentrated their usage is across the whole network: a
hashtag used heavily by only a couple of users has low entropy and is strong
evidence of a private social context.

Entropy is in bits; the Adamic-Adar log over popularity is natural. Both
bases are fixed here as module constants so experiments can flip them in one
place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dataset import Dataset, PairSample
from .errors import DataError
from .tables import FeatureTable

HASHTAG_FEATURE_NAMES = (
    "x_comm",
    "x_frac",
    "x_dotpro",
    "x_cosine",
    "x_minH",
    "x_aaH",
    "x_minE",
    "x_aaE",
    "x_w_aaE",
    "x_f_aaE",
)

#: log base for usage-count entropies (bits).
ENTROPY_LOG_BASE = 2.0
#: log used in the popularity Adamic-Adar sum (natural).
ADAMIC_ADAR_LOG = math.log

_MIN_ENTROPY = 1e-12


def entropy_bits(values) -> float:
    """Shannon entropy (base 2) of a nonnegative vector normalized to a distribution."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0 or np.any(arr < 0):
        raise DataError("entropy needs a nonempty nonnegative vector")
    total = arr.sum()
    if total <= 0.0:
        raise DataError("entropy of an all-zero vector is undefined")
    p = arr[arr > 0] / total
    return float(-(p * (np.log(p) / math.log(ENTROPY_LOG_BASE))).sum())


def hashtag_entropy(counts) -> float:
    """Entropy (bits) of a hashtag's per-user use-count vector."""
    return entropy_bits(counts)


@dataclass
class HashtagIndex:
    user_tags: Mapping[int, dict[str, int]]  # user -> hashtag -> use count
    tag_totals: Mapping[str, int]  # hashtag -> total uses across users
    tag_entropy: Mapping[str, float]  # hashtag -> entropy of its user-count vector
    user_norms: Mapping[int, float]  # user -> Euclidean norm of the count vector


def build_hashtag_index(d: Dataset) -> HashtagIndex:
    tag_totals = {}
    tag_entropy = {}
    for h in sorted(d.hashtag_users):
        by_user = d.hashtag_users[h]
        tag_totals[h] = sum(by_user.values())
        tag_entropy[h] = entropy_bits(list(by_user.values()))
    user_norms = {
        u: math.sqrt(sum(c * c for c in counts.values()))
        for u, counts in d.hashtag_counts.items()
    }
    return HashtagIndex(
        user_tags=d.hashtag_counts,
        tag_totals=tag_totals,
        tag_entropy=tag_entropy,
        user_norms=user_norms,
    )


def hashtag_features(idx: HashtagIndex, pair: PairSample) -> np.ndarray:
    """The ten overlap/entropy features in HASHTAG_FEATURE_NAMES order.

    Requires at least one common hashtag; the popularity filter must have run
    so that every surviving hashtag has at least two users (otherwise the
    log-popularity and entropy reciprocals would blow up).
    """
    tu = idx.user_tags.get(pair.u)
    tv = idx.user_tags.get(pair.v)
    if not tu or not tv:
        raise DataError(f"pair ({pair.u}, {pair.v}) lacks hashtags; hashtag modality unavailable")
    common = sorted(set(tu) & set(tv))
    if not common:
        raise DataError(f"pair ({pair.u}, {pair.v}) shares no hashtag; hashtag modality unavailable")
    union = set(tu) | set(tv)

    x_comm = float(len(common))
    x_frac = len(common) / len(union)
    x_dotpro = float(sum(tu[h] * tv[h] for h in common))
    x_cosine = x_dotpro / (idx.user_norms[pair.u] * idx.user_norms[pair.v])

    totals = []
    for h in common:
        t = idx.tag_totals[h]
        if t < 2:
            raise DataError(f"hashtag {h!r} has total use count {t} < 2; popularity filter not applied")
        totals.append(t)
    x_minH = float(min(totals))
    x_aaH = sum(1.0 / ADAMIC_ADAR_LOG(t) for t in totals)

    def checked_entropy(h: str) -> float:
        e = idx.tag_entropy[h]
        if e < _MIN_ENTROPY:
            raise DataError(f"hashtag {h!r} has entropy {e}; single-user hashtags must be filtered out")
        return e

    common_ents = [checked_entropy(h) for h in common]
    x_minE = min(common_ents)
    x_aaE = sum(1.0 / e for e in common_ents)
    x_w_aaE = x_aaE / len(union)
    x_f_aaE = x_aaE / sum(1.0 / checked_entropy(h) for h in union)

    return np.array(
        [x_comm, x_frac, x_dotpro, x_cosine, x_minH, x_aaH, x_minE, x_aaE, x_w_aaE, x_f_aaE],
        dtype=np.float64,
    )


def hashtag_feature_table(idx: HashtagIndex, pairs) -> FeatureTable:
    values = np.zeros((len(pairs), len(HASHTAG_FEATURE_NAMES)), dtype=np.float64)
    available = np.zeros(len(pairs), dtype=bool)
    for i, p in enumerate(pairs):
        if p.avail["H"]:
            values[i] = hashtag_features(idx, p)
            available[i] = True
    return FeatureTable("H", HASHTAG_FEATURE_NAMES, values, available)
