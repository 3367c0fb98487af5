"""Synthetic social network generator with planted communities and pair signals.

Users are split into communities; friendships follow a stochastic block model
(dense inside a community, sparse across). Content homophily comes from
community-level preferences: caption tokens, small-group hashtags, check-in
venues and image scene categories are all drawn mostly from a community block
and partly from shared noise pools. On top of that, a configurable share of
friend pairs receives private signals (one to three hashtags used only by the
two of them, plus a shared rare venue), which plants exactly the concentrated
low-popularity evidence the attacks look for.

Hashtag groups are sized 3..10 users so they survive the popularity filter,
and pair-private hashtags are the only two-user tags, which keeps their usage
entropy visibly below everything strangers can share. Private hashtags are
injected into several posts per owner so they survive post-removal
experiments.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import Dataset, Post, make_dataset
from .errors import ConfigError

log = logging.getLogger(__name__)

_PAIR_TAG_PREFIX = "pairtag"
_SIGNAL_TAG_USES = 5  # posts per owner carrying a pair-private hashtag
_SIGNAL_LOC_USES = 3  # check-ins per owner at the pair-private venue


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 300
    n_communities: int = 10
    p_in: float = 0.30
    p_out: float = 0.004
    posts_per_user: float = 40.0  # Poisson mean, floored at one post
    vocab_size: int = 2000
    n_hashtags: int = 600  # number of small-group hashtags
    n_locations: int = 120
    n_categories: int = 365
    topic_concentration: float = 0.75  # share of token draws from the community block
    pair_signal_rate: float = 0.7  # probability a friend pair gets private signals
    seed: int = 42

    def validate(self) -> "SynthConfig":
        for name in ("p_in", "p_out", "topic_concentration", "pair_signal_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        for name in ("n_users", "n_communities", "vocab_size", "n_hashtags",
                     "n_locations", "n_categories"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.n_communities > self.n_users:
            raise ConfigError("more communities than users")
        if self.posts_per_user <= 0:
            raise ConfigError("posts_per_user must be positive")
        return self


def _communities(cfg: SynthConfig) -> np.ndarray:
    return (np.arange(cfg.n_users) * cfg.n_communities) // cfg.n_users


def _block(values: int, shared: int, n_communities: int):
    """Split id space into a shared prefix and equal community blocks."""
    per = (values - shared) // n_communities
    if per < 1:
        raise ConfigError(f"id space of {values} too small for {n_communities} community blocks")
    starts = shared + per * np.arange(n_communities)
    return shared, per, starts


def generate(cfg: SynthConfig) -> tuple[Dataset, frozenset[tuple[int, int]]]:
    """Build the dataset and its planted friendship set, deterministically from cfg.seed."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    community = _communities(cfg)
    members = [np.flatnonzero(community == c) for c in range(cfg.n_communities)]

    # --- friendships: stochastic block model over unordered pairs
    iu, ju = np.triu_indices(cfg.n_users, k=1)
    same = community[iu] == community[ju]
    n_in = int(same.sum())
    if cfg.p_in * max(n_in, 1) < 1.0:
        log.warning("synth config expects under one within-community edge; attacks will see no signal")
    draw = rng.random(iu.size)
    probs = np.where(same, cfg.p_in, cfg.p_out)
    edge_mask = draw < probs
    edges = [(int(a), int(b)) for a, b in zip(iu[edge_mask], ju[edge_mask])]
    neighbors: list[list[int]] = [[] for _ in range(cfg.n_users)]
    for a, b in edges:
        neighbors[a].append(b)
        neighbors[b].append(a)

    # --- post skeletons
    n_posts = np.maximum(1, rng.poisson(cfg.posts_per_user, size=cfg.n_users))
    post_author: list[int] = []
    user_posts: list[list[int]] = [[] for _ in range(cfg.n_users)]
    for u in range(cfg.n_users):
        for _ in range(int(n_posts[u])):
            user_posts[u].append(len(post_author))
            post_author.append(u)
    total_posts = len(post_author)
    post_tokens: list[list[str]] = [[] for _ in range(total_posts)]
    post_tags: list[list[str]] = [[] for _ in range(total_posts)]
    post_location: list[int | None] = [None] * total_posts
    post_image: list[tuple[tuple[int, float], ...] | None] = [None] * total_posts

    # --- caption tokens: community block vs shared pool
    tok_shared, tok_per, tok_starts = _block(cfg.vocab_size, cfg.vocab_size // 4,
                                             cfg.n_communities)
    for pid, u in enumerate(post_author):
        c = community[u]
        k = 1 + rng.poisson(7)
        from_comm = rng.random(k) < cfg.topic_concentration
        ids = np.where(
            from_comm,
            tok_starts[c] + rng.integers(0, tok_per, size=k),
            rng.integers(0, tok_shared, size=k),
        )
        post_tokens[pid] = [f"tok{t:05d}" for t in ids]

    # --- small-group hashtags; most groups grow over a seed user's friends,
    # which is what makes shared tags social evidence, while the rest are
    # larger cross-community groups that give strangers some overlap too
    for g in range(cfg.n_hashtags):
        tag = f"tag{g:04d}"
        if rng.random() < 0.85:
            size = int(rng.integers(3, 9))
            pool = members[int(rng.integers(0, cfg.n_communities))]
            seed_user = int(rng.choice(pool))
            group = {seed_user}
            friend_pool = [v for v in neighbors[seed_user] if community[v] == community[seed_user]]
            for _ in range(size * 10):
                if len(group) >= min(size, pool.size):
                    break
                if friend_pool and rng.random() < 0.7:
                    group.add(int(rng.choice(friend_pool)))
                else:
                    group.add(int(rng.choice(pool)))
        else:
            size = min(int(rng.integers(6, 11)), cfg.n_users)
            group = {int(x) for x in rng.choice(cfg.n_users, size=size, replace=False)}
        if len(group) < 2:
            continue
        for u in sorted(group):
            uses = 1 + int(rng.poisson(1.5))
            uses = min(uses, len(user_posts[u]))
            for pid in rng.choice(user_posts[u], size=uses, replace=False):
                post_tags[int(pid)].append(tag)

    # --- check-ins: community venues vs shared popular venues
    loc_shared, loc_per, loc_starts = _block(cfg.n_locations, max(cfg.n_locations // 4, 1),
                                             cfg.n_communities)
    for pid, u in enumerate(post_author):
        if rng.random() < 0.65:
            c = community[u]
            if rng.random() < 0.7:
                post_location[pid] = int(loc_starts[c] + rng.integers(0, loc_per))
            else:
                post_location[pid] = int(rng.integers(0, loc_shared))

    # --- images: sparse category probabilities mixing community scenes,
    # per-user personal scenes that cut across communities, and global noise;
    # the personal share keeps this the weakest signal
    if cfg.n_categories >= 21 * cfg.n_communities:
        cat_shared, cat_per, cat_starts = _block(
            cfg.n_categories, cfg.n_categories - 20 * cfg.n_communities, cfg.n_communities
        )
    else:
        cat_shared, cat_per, cat_starts = _block(
            cfg.n_categories, max(cfg.n_categories // 3, 1), cfg.n_communities
        )
    personal_cats = rng.integers(0, cfg.n_categories, size=(cfg.n_users, 3))
    for pid, u in enumerate(post_author):
        if rng.random() >= 0.7:
            continue
        c = community[u]
        k = int(rng.integers(2, 5))
        cats: list[int] = []
        seen = set()
        for _ in range(k):
            r = rng.random()
            if r < 0.18:
                cat = int(cat_starts[c] + rng.integers(0, cat_per))
            elif r < 0.62:
                cat = int(personal_cats[u][rng.integers(0, 3)])
            else:
                cat = int(rng.integers(0, cat_shared))
            if cat not in seen:
                seen.add(cat)
                cats.append(cat)
        mass = rng.dirichlet(np.ones(len(cats))) * 0.92
        post_image[pid] = tuple(
            (cat, float(p)) for cat, p in sorted(zip(cats, mass)) if p > 0.0
        )

    # --- pair-private signals for a share of the friendships
    for edge_idx, (a, b) in enumerate(sorted(edges)):
        if rng.random() >= cfg.pair_signal_rate:
            continue
        n_tags = int(rng.integers(1, 4))
        for j in range(n_tags):
            tag = f"{_PAIR_TAG_PREFIX}{edge_idx:05d}_{j}"
            for u in (a, b):
                uses = min(_SIGNAL_TAG_USES, len(user_posts[u]))
                for pid in rng.choice(user_posts[u], size=uses, replace=False):
                    post_tags[int(pid)].append(tag)
        venue = cfg.n_locations + edge_idx
        for u in (a, b):
            uses = min(_SIGNAL_LOC_USES, len(user_posts[u]))
            for pid in rng.choice(user_posts[u], size=uses, replace=False):
                post_location[int(pid)] = venue

    posts = tuple(
        Post(
            post_id=pid + 1,
            author=post_author[pid],
            hashtags=tuple(post_tags[pid]),
            tokens=tuple(post_tokens[pid]),
            image_probs=post_image[pid],
            location=post_location[pid],
        )
        for pid in range(total_posts)
    )
    dataset = make_dataset(range(cfg.n_users), posts, edges)
    return dataset, frozenset(dataset.edges)


def write_dataset_files(d: Dataset, posts_path, edges_path) -> None:
    """Serialize a dataset back into the ingestion file formats."""
    with open(posts_path, "w", encoding="utf-8") as fh:
        for p in sorted(d.posts, key=lambda p: p.post_id):
            rec = {"user_id": p.author}
            if p.hashtags:
                rec["hashtags"] = list(p.hashtags)
            if p.tokens:
                rec["text"] = " ".join(p.tokens)
            if p.image_probs is not None:
                rec["image_probs"] = [[c, prob] for c, prob in p.image_probs]
            if p.location is not None:
                rec["location_id"] = p.location
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(edges_path, "w", encoding="utf-8") as fh:
        for u, v in sorted(d.edges):
            fh.write(f"{u},{v}\n")


def write_manifest(cfg: SynthConfig, d: Dataset, path) -> None:
    """Ground-truth manifest: config, communities and the planted friendships."""
    community = _communities(cfg)
    payload = {
        "config": asdict(cfg),
        "communities": {str(u): int(community[u]) for u in range(cfg.n_users)},
        "edges": [[u, v] for u, v in sorted(d.edges)],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
