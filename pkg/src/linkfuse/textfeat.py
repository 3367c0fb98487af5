"""Caption features: per-user TF-IDF vectors and eight pairwise distances.

Phase one turns each user's concatenated caption tokens into a TF-IDF vector
over the filtered vocabulary, normalized to unit Euclidean length. Phase two
compares the two vectors of a pair with the eight standard distance measures.

The idf is the literal log(n_users / (1 + df)) with a natural log and no
smoothing, so very common terms can receive zero or negative weight. Users
whose every term cancels keep an unnormalized all-zero row; the distance
layer defines cosine and correlation as 0 for such rows.
"""

from __future__ import annotations

import numpy as np

from .dataset import Dataset, PairSample
from .distances import MEASURE_NAMES, distance_profile
from .errors import DataError
from .tables import FeatureTable

TEXT_FEATURE_NAMES = MEASURE_NAMES


class TfidfMatrix:
    """Dense per-user TF-IDF matrix over a fixed vocabulary order."""

    def __init__(self, vocabulary: tuple[str, ...], users: tuple[int, ...], matrix: np.ndarray):
        self.vocabulary = vocabulary
        self.users = users
        self.matrix = matrix
        self.row_of = {u: i for i, u in enumerate(users)}

    def vector(self, user: int) -> np.ndarray | None:
        i = self.row_of.get(user)
        return None if i is None else self.matrix[i]


def tfidf(d: Dataset) -> TfidfMatrix:
    """TF-IDF rows for every user with at least one (filtered) caption token.

    tf(t, u) is the share of u's tokens that are t; idf(t) = ln(n / (1 + df))
    with n the number of users that have text and df the number using t.
    Rows with a positive norm are scaled to unit length.
    """
    vocab = sorted({t for counts in d.token_counts.values() for t in counts})
    users = tuple(sorted(u for u, counts in d.token_counts.items() if counts))
    col = {t: j for j, t in enumerate(vocab)}
    n_docs = len(users)
    df = np.zeros(len(vocab), dtype=np.float64)
    for u in users:
        for t in d.token_counts[u]:
            df[col[t]] += 1
    idf = np.log(n_docs / (1.0 + df)) if len(vocab) else np.zeros(0)

    matrix = np.zeros((n_docs, len(vocab)), dtype=np.float64)
    for i, u in enumerate(users):
        counts = d.token_counts[u]
        total = sum(counts.values())
        for t, c in counts.items():
            j = col[t]
            matrix[i, j] = (c / total) * idf[j]
        norm = np.linalg.norm(matrix[i])
        if norm > 0.0:
            matrix[i] /= norm
    return TfidfMatrix(tuple(vocab), users, matrix)


def text_features(m: TfidfMatrix, pair: PairSample) -> np.ndarray:
    """Eight distance measures between the pair's TF-IDF vectors, fixed order."""
    xu = m.vector(pair.u)
    xv = m.vector(pair.v)
    if xu is None or xv is None:
        raise DataError(f"pair ({pair.u}, {pair.v}) lacks a caption vector; text modality unavailable")
    return distance_profile(xu, xv)


def text_feature_table(m: TfidfMatrix, pairs) -> FeatureTable:
    values = np.zeros((len(pairs), len(TEXT_FEATURE_NAMES)), dtype=np.float64)
    available = np.zeros(len(pairs), dtype=bool)
    for i, p in enumerate(pairs):
        if p.avail["T"] and p.u in m.row_of and p.v in m.row_of:
            values[i] = text_features(m, p)
            available[i] = True
    return FeatureTable("T", TEXT_FEATURE_NAMES, values, available)
