"""Immutable social-post dataset: ingestion, derived indexes, preprocessing filters.

A Dataset is a snapshot of users, their posts (hashtag tokens, caption tokens,
sparse image-category probabilities, location check-ins) and the published
mutual-friendship graph. Loaders and filters always return a fresh snapshot
with every derived index rebuilt from the posts, so snapshots can be read
concurrently without locking.

The posts file is JSON Lines, one record per post with fields ``user_id``
(int, required), ``hashtags`` (array of strings), ``text`` (string),
``image_probs`` (array of ``[category_index, probability]`` pairs) and
``location_id`` (int). The edges file is a two-column CSV ``u,v`` of user ids,
unordered and deduplicated at load.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError

#: Canonical modality order: hashtags, text, images, locations, published edges.
MODALITIES = ("H", "T", "I", "L", "E")

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
MIN_TOKEN_LEN = 2


def tokenize(text: str) -> list[str]:
    """Lower-cased alphanumeric runs, dropping tokens shorter than 2 characters."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= MIN_TOKEN_LEN]


@dataclass(frozen=True)
class Post:
    post_id: int
    author: int
    hashtags: tuple[str, ...]  # repeats within one post count as repeat uses
    tokens: tuple[str, ...]
    image_probs: tuple[tuple[int, float], ...] | None = None
    location: int | None = None


@dataclass(frozen=True)
class Dataset:
    users: tuple[int, ...]
    posts: tuple[Post, ...]
    edges: frozenset[tuple[int, int]]
    # Derived indexes, rebuilt on every snapshot. Inner maps are never empty:
    # a user absent from an index has no data for that component.
    hashtag_counts: Mapping[int, dict[str, int]]  # user -> hashtag -> use count
    hashtag_users: Mapping[str, dict[int, int]]  # hashtag -> user -> use count
    token_counts: Mapping[int, dict[str, int]]  # user -> token -> use count
    location_counts: Mapping[int, dict[int, int]]  # user -> location -> visits
    image_counts: Mapping[int, int]  # user -> number of posts with an image
    degrees: Mapping[int, int]  # user -> degree in the published graph

    @property
    def n_users(self) -> int:
        return len(self.users)

    def hashtag_set(self, user: int) -> set[str]:
        return set(self.hashtag_counts.get(user, ()))


def build_indexes(users: Iterable[int], posts: Iterable[Post], edges: Iterable[tuple[int, int]]) -> dict:
    """Single-pass construction of every derived index from the raw posts."""
    hashtag_counts: dict[int, dict[str, int]] = {}
    hashtag_users: dict[str, dict[int, int]] = {}
    token_counts: dict[int, dict[str, int]] = {}
    location_counts: dict[int, dict[int, int]] = {}
    image_counts: dict[int, int] = {}
    for p in posts:
        u = p.author
        for h in p.hashtags:
            by_tag = hashtag_counts.setdefault(u, {})
            by_tag[h] = by_tag.get(h, 0) + 1
            by_user = hashtag_users.setdefault(h, {})
            by_user[u] = by_user.get(u, 0) + 1
        for t in p.tokens:
            by_tok = token_counts.setdefault(u, {})
            by_tok[t] = by_tok.get(t, 0) + 1
        if p.location is not None:
            by_loc = location_counts.setdefault(u, {})
            by_loc[p.location] = by_loc.get(p.location, 0) + 1
        if p.image_probs is not None:
            image_counts[u] = image_counts.get(u, 0) + 1
    degrees = {u: 0 for u in users}
    for a, b in edges:
        degrees[a] += 1
        degrees[b] += 1
    return {
        "hashtag_counts": hashtag_counts,
        "hashtag_users": hashtag_users,
        "token_counts": token_counts,
        "location_counts": location_counts,
        "image_counts": image_counts,
        "degrees": degrees,
    }


def normalize_edge(u: int, v: int) -> tuple[int, int]:
    if u == v:
        raise DataError(f"self-loop edge on user {u}")
    return (u, v) if u < v else (v, u)


def make_dataset(users: Iterable[int], posts: Iterable[Post], edges: Iterable[tuple[int, int]]) -> Dataset:
    """Validate and assemble a snapshot; every derived index is rebuilt here."""
    users_t = tuple(sorted(set(users)))
    user_set = set(users_t)
    posts_t = tuple(posts)
    seen_ids: set[int] = set()
    for p in posts_t:
        if p.post_id in seen_ids:
            raise DataError(f"duplicate post id {p.post_id}")
        seen_ids.add(p.post_id)
        if p.author not in user_set:
            raise DataError(f"post {p.post_id} authored by unknown user {p.author}")
        if p.image_probs is not None:
            cats = [c for c, _ in p.image_probs]
            if len(cats) != len(set(cats)):
                raise DataError(f"post {p.post_id} repeats an image category")
            total = 0.0
            for c, prob in p.image_probs:
                if c < 0:
                    raise DataError(f"post {p.post_id} has negative image category {c}")
                if prob <= 0.0 or prob > 1.0:
                    raise DataError(f"post {p.post_id} image probability {prob} outside (0, 1]")
                total += prob
            if total > 1.0 + 1e-6:
                raise DataError(f"post {p.post_id} image probabilities sum to {total:.6f} > 1")
    edge_set: set[tuple[int, int]] = set()
    for u, v in edges:
        e = normalize_edge(u, v)
        if e[0] not in user_set or e[1] not in user_set:
            missing = e[0] if e[0] not in user_set else e[1]
            raise DataError(f"edge ({u}, {v}) references unknown user {missing}")
        edge_set.add(e)
    idx = build_indexes(users_t, posts_t, edge_set)
    return Dataset(users=users_t, posts=posts_t, edges=frozenset(edge_set), **idx)


def _parse_post_record(rec: dict, lineno: int, n_categories: int) -> Post:
    if not isinstance(rec, dict):
        raise DataError(f"posts line {lineno}: record is not an object")
    if "user_id" not in rec or not isinstance(rec["user_id"], int) or isinstance(rec["user_id"], bool):
        raise DataError(f"posts line {lineno}: missing or non-integer user_id")
    author = rec["user_id"]
    if author < 0:
        raise DataError(f"posts line {lineno}: negative user_id {author}")

    hashtags_raw = rec.get("hashtags") or []
    if not isinstance(hashtags_raw, list) or any(not isinstance(h, str) for h in hashtags_raw):
        raise DataError(f"posts line {lineno}: hashtags must be an array of strings")
    hashtags = tuple(h.lower().lstrip("#") for h in hashtags_raw if h.lstrip("#"))

    text = rec.get("text") or ""
    if not isinstance(text, str):
        raise DataError(f"posts line {lineno}: text must be a string")

    image_probs = None
    if rec.get("image_probs") is not None:
        raw = rec["image_probs"]
        if not isinstance(raw, list):
            raise DataError(f"posts line {lineno}: image_probs must be an array of [index, prob] pairs")
        entries = []
        seen_cats: set[int] = set()
        total = 0.0
        for item in raw:
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise DataError(f"posts line {lineno}: image_probs entry {item!r} is not a pair")
            c, prob = item
            if not isinstance(c, int) or isinstance(c, bool):
                raise DataError(f"posts line {lineno}: image category {c!r} is not an integer")
            if c < 0 or c >= n_categories:
                raise DataError(f"posts line {lineno}: image category {c} outside 0..{n_categories - 1}")
            prob = float(prob)
            if prob < 0.0 or prob > 1.0:
                raise DataError(f"posts line {lineno}: image probability {prob} outside [0, 1]")
            if prob == 0.0:
                continue
            if c in seen_cats:
                raise DataError(f"posts line {lineno}: repeated image category {c}")
            seen_cats.add(c)
            total += prob
            entries.append((c, prob))
        if total > 1.0 + 1e-6:
            raise DataError(f"posts line {lineno}: image probabilities sum to {total:.6f} > 1")
        image_probs = tuple(entries)

    location = rec.get("location_id")
    if location is not None and (not isinstance(location, int) or isinstance(location, bool)):
        raise DataError(f"posts line {lineno}: location_id must be an integer")

    return Post(
        post_id=lineno,
        author=author,
        hashtags=hashtags,
        tokens=tuple(tokenize(text)),
        image_probs=image_probs,
        location=location,
    )


def load_dataset(posts_path, edges_path, n_categories: int = 365) -> Dataset:
    """Ingest the posts and edges files into a validated snapshot.

    Post ids are the 1-based line numbers of the posts file, which keeps
    post-removal experiments reproducible. The result is independent of the
    record order inside the files.
    """
    posts: list[Post] = []
    with open(posts_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"posts line {lineno}: invalid JSON ({exc.msg})") from exc
            posts.append(_parse_post_record(rec, lineno, n_categories))

    users = sorted({p.author for p in posts})
    user_set = set(users)
    edges: set[tuple[int, int]] = set()
    with open(edges_path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise DataError(f"edges line {lineno}: expected two columns, got {len(row)}")
            try:
                u, v = int(row[0]), int(row[1])
            except ValueError as exc:
                raise DataError(f"edges line {lineno}: non-integer user id") from exc
            if u == v:
                raise DataError(f"edges line {lineno}: self-loop on user {u}")
            e = normalize_edge(u, v)
            if e[0] not in user_set or e[1] not in user_set:
                missing = e[0] if e[0] not in user_set else e[1]
                raise DataError(f"edges line {lineno}: unknown user {missing}")
            edges.add(e)
    return make_dataset(users, posts, edges)


def nearest_rank(sorted_vals, pct: float):
    """Nearest-rank percentile of an ascending sequence."""
    n = len(sorted_vals)
    rank = min(max(math.ceil(pct * n), 1), n)
    return sorted_vals[rank - 1]


def filter_accounts(d: Dataset, low_pct: float = 0.10, high_pct: float = 0.90) -> Dataset:
    """Drop users whose degree falls strictly outside the percentile window.

    Degree in the published mutual-follow graph stands in for follower count.
    Users strictly below the nearest-rank ``low_pct`` percentile or strictly
    above the ``high_pct`` percentile are removed together with their posts
    and incident edges.
    """
    if not d.users:
        return d
    degs = sorted(d.degrees[u] for u in d.users)
    lo = nearest_rank(degs, low_pct)
    hi = nearest_rank(degs, high_pct)
    keep = {u for u in d.users if lo <= d.degrees[u] <= hi}
    posts = tuple(p for p in d.posts if p.author in keep)
    edges = [e for e in d.edges if e[0] in keep and e[1] in keep]
    return make_dataset(keep, posts, edges)


def filter_hashtags(d: Dataset, min_users: int = 2, max_users: int = 10) -> Dataset:
    """Remove hashtags used by fewer than ``min_users`` or more than ``max_users`` distinct users."""
    keep = {h for h, by_user in d.hashtag_users.items() if min_users <= len(by_user) <= max_users}
    posts = tuple(
        replace(p, hashtags=tuple(h for h in p.hashtags if h in keep)) if p.hashtags else p
        for p in d.posts
    )
    return make_dataset(d.users, posts, d.edges)


def filter_tokens(d: Dataset, min_users: int = 2, max_users: int = 100) -> Dataset:
    """Remove caption tokens used by fewer than ``min_users`` or more than ``max_users`` distinct users."""
    token_user_count: dict[str, int] = {}
    for counts in d.token_counts.values():
        for t in counts:
            token_user_count[t] = token_user_count.get(t, 0) + 1
    keep = {t for t, n in token_user_count.items() if min_users <= n <= max_users}
    posts = tuple(
        replace(p, tokens=tuple(t for t in p.tokens if t in keep)) if p.tokens else p
        for p in d.posts
    )
    return make_dataset(d.users, posts, d.edges)


def filter_location_users(d: Dataset, min_distinct: int = 2, min_checkins: int = 20) -> frozenset[int]:
    """Users eligible for the location component: enough check-ins spread over
    at least ``min_distinct`` places (single-venue accounts behave like
    businesses, not people). Does not mutate the snapshot."""
    eligible = set()
    for u, locs in d.location_counts.items():
        if len(locs) >= min_distinct and sum(locs.values()) >= min_checkins:
            eligible.add(u)
    return frozenset(eligible)


def preprocess(d: Dataset, low_pct: float = 0.10, high_pct: float = 0.90,
               tag_min: int = 2, tag_max: int = 10,
               token_min: int = 2, token_max: int = 100) -> Dataset:
    """Standard filter chain in fixed order: accounts, hashtags, tokens."""
    return filter_tokens(
        filter_hashtags(filter_accounts(d, low_pct, high_pct), tag_min, tag_max),
        token_min, token_max,
    )


@dataclass(frozen=True)
class PairSample:
    u: int
    v: int
    label: int  # 1 friend, 0 stranger
    avail: Mapping[str, bool]

    @property
    def pair(self) -> tuple[int, int]:
        return (self.u, self.v)


def pair_availability(d: Dataset, eligible_loc: frozenset[int], u: int, v: int,
                      tag_sets: Mapping[int, set[str]] | None = None) -> dict[str, bool]:
    """Per-modality availability flags for a user pair, from the snapshot indexes."""
    if tag_sets is not None:
        tu, tv = tag_sets.get(u), tag_sets.get(v)
    else:
        tu = set(d.hashtag_counts[u]) if u in d.hashtag_counts else None
        tv = set(d.hashtag_counts[v]) if v in d.hashtag_counts else None
    return {
        "H": bool(tu) and bool(tv) and not tu.isdisjoint(tv),
        "T": bool(d.token_counts.get(u)) and bool(d.token_counts.get(v)),
        "I": d.image_counts.get(u, 0) > 0 and d.image_counts.get(v, 0) > 0,
        "L": u in eligible_loc and v in eligible_loc,
        "E": d.degrees.get(u, 0) > 0 and d.degrees.get(v, 0) > 0,
    }


def build_pairs(d: Dataset, seed: int, loc_min_distinct: int = 2,
                loc_min_checkins: int = 20) -> tuple[PairSample, ...]:
    """Label-balanced pair samples: every friend pair with at least one
    available modality, plus an equal number of stranger pairs drawn uniformly
    from the non-adjacent pairs that also have at least one available modality.

    The stranger pool is sampled once and shared by every attack so their AUCs
    stay comparable. A stranger pair's hashtag flag, like a friend pair's,
    requires at least one common hashtag.
    """
    eligible_loc = filter_location_users(d, loc_min_distinct, loc_min_checkins)
    tag_sets = {u: set(c) for u, c in d.hashtag_counts.items()}

    positives: list[PairSample] = []
    for u, v in sorted(d.edges):
        avail = pair_availability(d, eligible_loc, u, v, tag_sets)
        if any(avail.values()):
            positives.append(PairSample(u, v, 1, avail))

    candidates: list[PairSample] = []
    users = d.users
    edge_set = d.edges
    for i, u in enumerate(users):
        for v in users[i + 1:]:
            if (u, v) in edge_set:
                continue
            avail = pair_availability(d, eligible_loc, u, v, tag_sets)
            if any(avail.values()):
                candidates.append(PairSample(u, v, 0, avail))

    n_pos = len(positives)
    if len(candidates) < n_pos:
        raise DataError(
            f"stranger sampling needs {n_pos} non-adjacent pairs with an available "
            f"modality but only {len(candidates)} exist (deficit {n_pos - len(candidates)})"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(candidates), size=n_pos, replace=False)
    negatives = [candidates[i] for i in sorted(chosen)]
    return tuple(positives + negatives)
