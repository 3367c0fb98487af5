"""Pairwise distance and similarity measures between numeric feature vectors.

All eight measures are symmetric and operate on equal-length 1-D arrays.
Coordinates that are zero in both vectors contribute nothing to any measure,
so padding a pair of vectors with shared zero dimensions never changes a
result. ``cosine`` and ``correlation`` are emitted in similarity form (not as
``1 - value``); downstream classifiers and the orientation-corrected
unsupervised evaluator handle either direction.
"""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)

MEASURE_NAMES = (
    "cosine",
    "euclidean",
    "correlation",
    "chebyshev",
    "bray_curtis",
    "canberra",
    "manhattan",
    "sq_euclidean",
)


def cosine(x: np.ndarray, y: np.ndarray) -> float:
    """x.y / (|x||y|); defined as 0.0 when either vector is all-zero."""
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        log.debug("cosine on zero vector, emitting 0.0")
        return 0.0
    return float(np.dot(x, y)) / (nx * ny)


def euclidean(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.linalg.norm(x - y))


def correlation(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation; defined as 0.0 when either vector is constant."""
    xc = x - x.mean() if x.size else x
    yc = y - y.mean() if y.size else y
    return cosine(xc, yc)


def chebyshev(x: np.ndarray, y: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x - y)))


def bray_curtis(x: np.ndarray, y: np.ndarray) -> float:
    """sum|x_i - y_i| / sum|x_i + y_i|; 0.0 when the denominator vanishes."""
    den = float(np.sum(np.abs(x + y)))
    if den == 0.0:
        return 0.0
    return float(np.sum(np.abs(x - y))) / den


def canberra(x: np.ndarray, y: np.ndarray) -> float:
    """sum |x_i - y_i| / (|x_i| + |y_i|), with 0/0 terms contributing 0."""
    num = np.abs(x - y)
    den = np.abs(x) + np.abs(y)
    mask = den > 0.0
    if not mask.any():
        return 0.0
    return float(np.sum(num[mask] / den[mask]))


def manhattan(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(np.abs(x - y)))


def sq_euclidean(x: np.ndarray, y: np.ndarray) -> float:
    d = x - y
    return float(np.dot(d, d))


_MEASURES = (
    cosine,
    euclidean,
    correlation,
    chebyshev,
    bray_curtis,
    canberra,
    manhattan,
    sq_euclidean,
)


def distance_profile(x, y) -> np.ndarray:
    """All eight measures in the fixed MEASURE_NAMES order."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"distance_profile needs equal-length 1-D vectors, got {x.shape} vs {y.shape}")
    return np.array([m(x, y) for m in _MEASURES], dtype=np.float64)
