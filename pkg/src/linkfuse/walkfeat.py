"""Location and partial-network feature pipelines built on the walk engine.

Location: eligible users and the places they visit form a bipartite graph
weighted by visit count; plain weighted walks plus skip-gram produce user
vectors, and a pair's features are the eight distances between its vectors.

Network: a fixed fraction of the published friendships is sampled into a
partial graph; the held-out remainder never enters any walk. Walks biased by
the return/in-out parameters plus skip-gram produce user vectors, and a
pair's features are the Hadamard product of its vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import Dataset, filter_location_users
from .embed import (EmbedConfig, Embedding, WalkGraph, derive_seed,
                    hadamard_features, pairwise_distance_features,
                    random_walks, train_skipgram)
from .errors import ConfigError, DataError
from .tables import FeatureTable
from .textfeat import TEXT_FEATURE_NAMES

_USER = "u"
_PLACE = "l"


@dataclass
class LocationResult:
    table: FeatureTable
    embedding: Embedding
    eligible: frozenset[int]


def location_features(d: Dataset, pairs, cfg: EmbedConfig = EmbedConfig(),
                      seed: int = 0, min_distinct: int = 2,
                      min_checkins: int = 20) -> LocationResult:
    """Check-in features for every pair whose two users are location-eligible.

    The bipartite walk is always unbiased (p = q = 1) regardless of the
    configured biases.
    """
    cfg = replace(cfg, p=1.0, q=1.0).validate()
    eligible = filter_location_users(d, min_distinct, min_checkins)
    edges = []
    for u in sorted(eligible):
        for loc in sorted(d.location_counts[u]):
            edges.append(((_USER, u), (_PLACE, loc), float(d.location_counts[u][loc])))

    n_pairs = len(pairs)
    values = np.zeros((n_pairs, len(TEXT_FEATURE_NAMES)), dtype=np.float64)
    available = np.zeros(n_pairs, dtype=bool)
    if not edges:
        emb = Embedding(config=cfg, seed=seed, nodes=(), matrix=np.zeros((0, cfg.dim)),
                        epoch_losses=())
        return LocationResult(
            table=FeatureTable("L", TEXT_FEATURE_NAMES, values, available),
            embedding=emb, eligible=eligible,
        )

    graph = WalkGraph(edges)
    walks = random_walks(graph, cfg.walks_per_node, cfg.walk_length,
                         p=1.0, q=1.0, seed=derive_seed(seed, 1))
    emb = train_skipgram(walks, cfg, seed=derive_seed(seed, 2))
    for i, p in enumerate(pairs):
        if not p.avail["L"]:
            continue
        profile = pairwise_distance_features(emb, (_USER, p.u), (_USER, p.v))
        if profile is None:
            continue
        values[i] = profile
        available[i] = True
    return LocationResult(
        table=FeatureTable("L", TEXT_FEATURE_NAMES, values, available),
        embedding=emb, eligible=eligible,
    )


@dataclass
class NetworkResult:
    table: FeatureTable
    embedding: Embedding
    kept_edges: tuple[tuple[int, int], ...]  # the partial graph
    held_out_edges: tuple[tuple[int, int], ...]  # never walked
    walks: list[tuple]


def network_features(d: Dataset, pairs, train_edge_fraction: float = 0.8,
                     cfg: EmbedConfig = EmbedConfig(), seed: int = 0) -> NetworkResult:
    """Hadamard embedding features from a partial copy of the published graph.

    ``train_edge_fraction`` of the friendships is sampled once per seed; the
    held-out edges stay out of every walk so they remain genuine prediction
    targets. Nodes are all users with at least one published friendship; a
    node isolated inside the partial graph still appears in its own length-1
    walks and so keeps its (untrained) vector.
    """
    cfg.validate()
    if not (0.0 < train_edge_fraction <= 1.0):
        raise ConfigError(f"train_edge_fraction must be in (0, 1], got {train_edge_fraction}")
    all_edges = sorted(d.edges)
    if not all_edges:
        raise DataError("network features need at least one published edge")
    n_keep = int(np.floor(train_edge_fraction * len(all_edges) + 1e-9))
    if n_keep == 0:
        raise DataError(
            f"partial graph would be empty: {train_edge_fraction} of {len(all_edges)} edges"
        )
    split_rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0)))
    chosen = np.sort(split_rng.choice(len(all_edges), size=n_keep, replace=False))
    chosen_set = set(chosen.tolist())
    kept = tuple(all_edges[i] for i in chosen)
    held_out = tuple(e for i, e in enumerate(all_edges) if i not in chosen_set)

    graph = WalkGraph((u, v, 1.0) for u, v in kept)
    graph.add_isolated(u for u in d.users if d.degrees.get(u, 0) > 0)
    walks = random_walks(graph, cfg.walks_per_node, cfg.walk_length,
                         p=cfg.p, q=cfg.q, seed=derive_seed(seed, 1))
    emb = train_skipgram(walks, cfg, seed=derive_seed(seed, 2))

    names = tuple(f"hadamard_{j:03d}" for j in range(cfg.dim))
    values = np.zeros((len(pairs), cfg.dim), dtype=np.float64)
    available = np.zeros(len(pairs), dtype=bool)
    for i, p in enumerate(pairs):
        if not p.avail["E"]:
            continue
        feats = hadamard_features(emb, p.u, p.v)
        if feats is None:
            continue
        values[i] = feats
        available[i] = True
    return NetworkResult(
        table=FeatureTable("E", names, values, available),
        embedding=emb,
        kept_edges=kept,
        held_out_edges=held_out,
        walks=walks,
    )


def scan_walks_for_edges(walks, edges) -> int:
    """Count consecutive walk steps that traverse any of the given edges."""
    targets = {(min(u, v), max(u, v)) for u, v in edges}
    hits = 0
    for walk in walks:
        for a, b in zip(walk, walk[1:]):
            key = (a, b) if a < b else (b, a)
            if key in targets:
                hits += 1
    return hits
