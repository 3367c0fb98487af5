"""Weighted random walks and skip-gram training for node embeddings.

The walk generator supports second-order (return / in-out biased) transitions;
with both bias parameters at 1 it reduces to a plain weighted random walk.
Every walk owns an RNG stream derived from (seed, start node, walk index), so
regenerating walks is deterministic and order-independent.

The skip-gram trains center vectors with negative sampling from the
unigram^0.75 distribution, sequential SGD, and a linearly decaying learning
rate. The update loop is compiled with numba when available; the analytic
gradient it applies is exposed separately for finite-difference checking.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .distances import distance_profile
from .errors import ConfigError, DataError

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def derive_seed(*parts: int) -> int:
    """Stable 32-bit seed derived from a tuple of integers."""
    return int(np.random.SeedSequence(entropy=tuple(parts)).generate_state(1, np.uint32)[0])


@dataclass(frozen=True)
class EmbedConfig:
    dim: int = 128
    walks_per_node: int = 10
    walk_length: int = 80
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025
    lr_min: float = 1e-4
    p: float = 1.0  # return bias: lower means walks backtrack more
    q: float = 1.0  # in-out bias: lower means walks roam further

    def validate(self) -> "EmbedConfig":
        if self.dim <= 0:
            raise ConfigError(f"embedding dim must be positive, got {self.dim}")
        if self.window <= 0:
            raise ConfigError(f"window must be positive, got {self.window}")
        if self.walk_length < 1 or self.walks_per_node < 1:
            raise ConfigError("walk_length and walks_per_node must be at least 1")
        if self.negatives < 0 or self.epochs < 0:
            raise ConfigError("negatives and epochs cannot be negative")
        if self.lr <= 0 or self.lr_min <= 0 or self.p <= 0 or self.q <= 0:
            raise ConfigError("lr, lr_min, p and q must be positive")
        return self


class WalkGraph:
    """Undirected weighted graph with the adjacency laid out for fast sampling."""

    def __init__(self, edges):
        """``edges`` yields (node_a, node_b, weight) with weight > 0; duplicate
        edges accumulate weight. Node keys only need to be sortable/hashable."""
        weight_map: dict = {}
        for a, b, w in edges:
            if a == b:
                raise DataError(f"self-loop on node {a!r}")
            if w <= 0:
                raise DataError(f"non-positive edge weight {w} on ({a!r}, {b!r})")
            key = (a, b) if repr(a) <= repr(b) else (b, a)
            weight_map[key] = weight_map.get(key, 0.0) + float(w)
        nodes = sorted({n for e in weight_map for n in e}, key=repr)
        self.nodes: tuple = tuple(nodes)
        self.index = {n: i for i, n in enumerate(nodes)}
        adj: list[list[tuple[int, float]]] = [[] for _ in nodes]
        for (a, b), w in weight_map.items():
            ia, ib = self.index[a], self.index[b]
            adj[ia].append((ib, w))
            adj[ib].append((ia, w))
        self.neighbors: list[np.ndarray] = []
        self.weights: list[np.ndarray] = []
        self.cum_weights: list[np.ndarray] = []
        self.neighbor_sets: list[set[int]] = []
        for entries in adj:
            entries.sort()
            nbr = np.asarray([e[0] for e in entries], dtype=np.int64)
            wts = np.asarray([e[1] for e in entries], dtype=np.float64)
            self.neighbors.append(nbr)
            self.weights.append(wts)
            self.cum_weights.append(np.cumsum(wts))
            self.neighbor_sets.append(set(nbr.tolist()))

    def add_isolated(self, nodes) -> None:
        """Register nodes that have no edges; their walks stay at length 1."""
        for n in sorted(set(nodes) - set(self.index), key=repr):
            self.index[n] = len(self.nodes)
            self.nodes = self.nodes + (n,)
            self.neighbors.append(np.empty(0, dtype=np.int64))
            self.weights.append(np.empty(0, dtype=np.float64))
            self.cum_weights.append(np.empty(0, dtype=np.float64))
            self.neighbor_sets.append(set())

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


def _step_plain(g: WalkGraph, cur: int, rng) -> int:
    cum = g.cum_weights[cur]
    r = rng.random() * cum[-1]
    j = int(np.searchsorted(cum, r, side="right"))
    return int(g.neighbors[cur][min(j, len(cum) - 1)])


def _step_biased(g: WalkGraph, prev: int, cur: int, p: float, q: float, rng) -> int:
    nbrs = g.neighbors[cur]
    wts = g.weights[cur].copy()
    prev_set = g.neighbor_sets[prev]
    for i in range(len(nbrs)):
        n = int(nbrs[i])
        if n == prev:
            wts[i] /= p
        elif n not in prev_set:
            wts[i] /= q
    cum = np.cumsum(wts)
    r = rng.random() * cum[-1]
    j = int(np.searchsorted(cum, r, side="right"))
    return int(nbrs[min(j, len(nbrs) - 1)])


def random_walks(g: WalkGraph, walks_per_node: int, walk_length: int,
                 p: float = 1.0, q: float = 1.0, seed: int = 0) -> list[tuple]:
    """``walks_per_node`` truncated walks from every node; transition odds are
    proportional to edge weight, reshaped by the return/in-out biases p and q.
    Isolated nodes yield length-1 walks."""
    if g.n_nodes == 0:
        raise DataError("cannot walk an empty graph")
    if walk_length < 1 or walks_per_node < 1:
        raise ConfigError("walk_length and walks_per_node must be at least 1")
    if p <= 0 or q <= 0:
        raise ConfigError("p and q must be positive")
    unbiased = p == 1.0 and q == 1.0
    walks: list[tuple] = []
    for start in range(g.n_nodes):
        for w in range(walks_per_node):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, start, w)))
            walk = [start]
            prev = -1
            cur = start
            for _ in range(walk_length - 1):
                if len(g.neighbors[cur]) == 0:
                    break
                if unbiased or prev < 0:
                    nxt = _step_plain(g, cur, rng)
                else:
                    nxt = _step_biased(g, prev, cur, p, q, rng)
                walk.append(nxt)
                prev, cur = cur, nxt
            walks.append(tuple(g.nodes[i] for i in walk))
    return walks


@njit(cache=True)
def _sgd_chunk(w_in, w_out, centers, contexts, negatives, lrs):
    """Sequential skip-gram updates over one chunk of (center, context) pairs.

    Negative draws that collide with the positive context are skipped. Returns
    the summed loss measured before each update.
    """
    total_loss = 0.0
    dim = w_in.shape[1]
    n_neg = negatives.shape[1]
    grad = np.empty(dim, np.float64)
    for i in range(centers.shape[0]):
        c = centers[i]
        pos = contexts[i]
        lr = lrs[i]
        for j in range(dim):
            grad[j] = 0.0
        dot = 0.0
        for j in range(dim):
            dot += w_in[c, j] * w_out[pos, j]
        sig = 1.0 / (1.0 + np.exp(-dot))
        loss_term = sig if sig > 1e-12 else 1e-12
        total_loss += -np.log(loss_term)
        g = lr * (1.0 - sig)
        for j in range(dim):
            grad[j] += g * w_out[pos, j]
            w_out[pos, j] += g * w_in[c, j]
        for k in range(n_neg):
            neg = negatives[i, k]
            if neg == pos:
                continue
            dot = 0.0
            for j in range(dim):
                dot += w_in[c, j] * w_out[neg, j]
            sig = 1.0 / (1.0 + np.exp(-dot))
            loss_term = 1.0 - sig
            if loss_term < 1e-12:
                loss_term = 1e-12
            total_loss += -np.log(loss_term)
            g = lr * (0.0 - sig)
            for j in range(dim):
                grad[j] += g * w_out[neg, j]
                w_out[neg, j] += g * w_in[c, j]
        for j in range(dim):
            w_in[c, j] += grad[j]
    return total_loss


def pair_loss(center_vec: np.ndarray, out_vecs: np.ndarray, labels: np.ndarray) -> float:
    """Negative-sampling loss of one center against labelled output vectors."""
    scores = out_vecs @ center_vec
    sig = 1.0 / (1.0 + np.exp(-scores))
    eps = 1e-12
    return float(-(labels * np.log(np.maximum(sig, eps))
                   + (1 - labels) * np.log(np.maximum(1 - sig, eps))).sum())


def pair_grads(center_vec: np.ndarray, out_vecs: np.ndarray, labels: np.ndarray):
    """Analytic gradients of pair_loss w.r.t. the center and output vectors."""
    scores = out_vecs @ center_vec
    sig = 1.0 / (1.0 + np.exp(-scores))
    coeff = sig - labels  # dL/dscore
    grad_center = out_vecs.T @ coeff
    grad_out = np.outer(coeff, center_vec)
    return grad_center, grad_out


@dataclass
class Embedding:
    config: EmbedConfig
    seed: int
    nodes: tuple
    matrix: np.ndarray  # (n_nodes, dim) center vectors
    epoch_losses: tuple[float, ...]

    def __post_init__(self):
        self.index = {n: i for i, n in enumerate(self.nodes)}

    def vector(self, node) -> np.ndarray | None:
        i = self.index.get(node)
        return None if i is None else self.matrix[i]


def _walk_pair_counts(walk_id, reduced, window):
    total = 0
    for off in range(1, window + 1):
        same = walk_id[off:] == walk_id[:-off]
        total += int(np.sum(same & (reduced[off:] >= off)))
        total += int(np.sum(same & (reduced[:-off] >= off)))
    return total


def _walk_pairs(tokens, walk_id, reduced, window):
    centers = []
    contexts = []
    for off in range(1, window + 1):
        same = walk_id[off:] == walk_id[:-off]
        m1 = same & (reduced[off:] >= off)
        m2 = same & (reduced[:-off] >= off)
        centers.append(tokens[off:][m1])
        contexts.append(tokens[:-off][m1])
        centers.append(tokens[:-off][m2])
        contexts.append(tokens[off:][m2])
    return np.concatenate(centers), np.concatenate(contexts)


_CHUNK = 1_000_000


def train_skipgram(walks, cfg: EmbedConfig, seed: int = 0) -> Embedding:
    """Train center vectors on walk traces.

    Per epoch, each walk position gets a reduced window drawn from
    1..cfg.window and contributes (center, context) pairs inside it. The
    learning rate decays linearly over all scheduled pairs down to cfg.lr_min.
    With epochs=0 the freshly initialized vectors are returned unchanged.
    """
    cfg.validate()
    walks = list(walks)
    if not walks:
        raise DataError("cannot train an embedding on zero walks")
    nodes = tuple(sorted({n for walk in walks for n in walk}, key=repr))
    index = {n: i for i, n in enumerate(nodes)}
    n_vocab = len(nodes)

    init_rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0)))
    w_in = (init_rng.random((n_vocab, cfg.dim)) - 0.5) / cfg.dim
    w_out = np.zeros((n_vocab, cfg.dim), dtype=np.float64)

    if cfg.epochs == 0:
        return Embedding(config=cfg, seed=seed, nodes=nodes,
                         matrix=w_in, epoch_losses=())

    tokens = np.fromiter(
        (index[n] for walk in walks for n in walk), dtype=np.int64,
        count=sum(len(w) for w in walks),
    )
    walk_id = np.fromiter(
        (i for i, walk in enumerate(walks) for _ in walk), dtype=np.int64,
        count=tokens.size,
    )
    counts = np.bincount(tokens, minlength=n_vocab).astype(np.float64)
    noise = counts ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())

    window_rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 1)))
    neg_rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 2)))
    reduced_all = [
        window_rng.integers(1, cfg.window + 1, size=tokens.size, dtype=np.int64)
        for _ in range(cfg.epochs)
    ]
    total_pairs = sum(_walk_pair_counts(walk_id, r, cfg.window) for r in reduced_all)
    if total_pairs == 0:
        # only length-1 walks: nothing to train on
        return Embedding(config=cfg, seed=seed, nodes=nodes,
                         matrix=w_in, epoch_losses=(0.0,) * cfg.epochs)

    losses = []
    processed = 0
    for reduced in reduced_all:
        centers, contexts = _walk_pairs(tokens, walk_id, reduced, cfg.window)
        n_pairs = centers.size
        lrs = np.maximum(
            cfg.lr_min,
            cfg.lr * (1.0 - (processed + np.arange(n_pairs)) / total_pairs),
        )
        epoch_loss = 0.0
        for lo in range(0, n_pairs, _CHUNK):
            hi = min(lo + _CHUNK, n_pairs)
            negs = np.searchsorted(
                noise_cdf, neg_rng.random((hi - lo, cfg.negatives)), side="right"
            ).astype(np.int64)
            np.clip(negs, 0, n_vocab - 1, out=negs)
            epoch_loss += _sgd_chunk(
                w_in, w_out,
                np.ascontiguousarray(centers[lo:hi]),
                np.ascontiguousarray(contexts[lo:hi]),
                negs, np.ascontiguousarray(lrs[lo:hi]),
            )
        processed += n_pairs
        losses.append(epoch_loss / n_pairs)
    return Embedding(config=cfg, seed=seed, nodes=nodes,
                     matrix=w_in, epoch_losses=tuple(losses))


def pairwise_distance_features(e: Embedding, u, v) -> np.ndarray | None:
    """Eight distance measures between two node vectors; None when either is missing."""
    xu = e.vector(u)
    xv = e.vector(v)
    if xu is None or xv is None:
        return None
    return distance_profile(xu, xv)


def hadamard_features(e: Embedding, u, v) -> np.ndarray | None:
    """Componentwise product of two node vectors; None when either is missing."""
    xu = e.vector(u)
    xv = e.vector(v)
    if xu is None or xv is None:
        return None
    return xu * xv


def save_embedding(path, ids, matrix) -> None:
    """Persist rows as ``id,f0,...``; the header carries (dim, count)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([matrix.shape[1], len(ids)])
        for node_id, row in zip(ids, matrix):
            writer.writerow([node_id] + [repr(float(x)) for x in row])


def load_embedding(path) -> tuple[dict[int, np.ndarray], int]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 2:
            raise DataError(f"{path}: missing embedding header")
        dim, count = int(header[0]), int(header[1])
        vectors: dict[int, np.ndarray] = {}
        for row in reader:
            vec = np.asarray([float(x) for x in row[1:]], dtype=np.float64)
            if vec.size != dim:
                raise DataError(f"{path}: row for node {row[0]} has {vec.size} dims, expected {dim}")
            vectors[int(row[0])] = vec
    if len(vectors) != count:
        raise DataError(f"{path}: header promised {count} rows, found {len(vectors)}")
    return vectors, dim
