import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linkfuse.dataset import (Post, build_indexes, build_pairs, filter_accounts,
                              filter_hashtags, filter_location_users,
                              filter_tokens, load_dataset, make_dataset,
                              nearest_rank, tokenize)
from linkfuse.errors import DataError


def write_files(tmp_path, post_records, edge_rows):
    posts = tmp_path / "posts.jsonl"
    edges = tmp_path / "edges.csv"
    posts.write_text("\n".join(json.dumps(r) for r in post_records) + ("\n" if post_records else ""))
    edges.write_text("\n".join(f"{u},{v}" for u, v in edge_rows) + ("\n" if edge_rows else ""))
    return posts, edges


def test_tokenize_rules():
    assert tokenize("Hello, WORLD! a b2c_x 42") == ["hello", "world", "b2c", "42"]
    assert tokenize("") == []


def test_load_empty(tmp_path):
    posts, edges = write_files(tmp_path, [], [])
    d = load_dataset(posts, edges)
    assert d.users == () and d.posts == () and not d.edges
    assert not d.hashtag_counts and not d.token_counts


def test_load_counts_within_post_repeats(tmp_path):
    posts, edges = write_files(tmp_path, [{"user_id": 1, "hashtags": ["a", "a", "b"]}], [])
    d = load_dataset(posts, edges)
    assert d.hashtag_counts[1] == {"a": 2, "b": 1}
    assert d.hashtag_users["a"] == {1: 2}


def test_rebuild_and_compare_indexes(tmp_path):
    records = [
        {"user_id": 1, "hashtags": ["x"], "text": "go team go", "location_id": 7},
        {"user_id": 2, "text": "team spirit", "image_probs": [[3, 0.5], [9, 0.2]]},
        {"user_id": 1, "hashtags": ["x", "y"], "image_probs": [[3, 0.9]]},
    ]
    posts, edges = write_files(tmp_path, records, [(1, 2)])
    d = load_dataset(posts, edges)
    rebuilt = build_indexes(d.users, d.posts, d.edges)
    assert rebuilt["hashtag_counts"] == d.hashtag_counts
    assert rebuilt["hashtag_users"] == d.hashtag_users
    assert rebuilt["token_counts"] == d.token_counts
    assert rebuilt["location_counts"] == d.location_counts
    assert rebuilt["image_counts"] == d.image_counts
    assert rebuilt["degrees"] == d.degrees


def test_load_order_independent(tmp_path):
    records = [
        {"user_id": 1, "hashtags": ["x"]},
        {"user_id": 2, "hashtags": ["y"]},
    ]
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    pa, ea = write_files(tmp_path / "a", records, [(1, 2)])
    pb, eb = write_files(tmp_path / "b", list(reversed(records)), [(2, 1)])
    da = load_dataset(pa, ea)
    db = load_dataset(pb, eb)
    assert da.users == db.users and da.edges == db.edges
    assert da.hashtag_counts == db.hashtag_counts


def test_load_errors_report_line(tmp_path):
    posts = tmp_path / "posts.jsonl"
    posts.write_text('{"user_id": 1}\nnot json\n')
    edges = tmp_path / "edges.csv"
    edges.write_text("")
    with pytest.raises(DataError, match="line 2"):
        load_dataset(posts, edges)


def test_load_rejects_unknown_edge_user(tmp_path):
    posts, edges = write_files(tmp_path, [{"user_id": 1}, {"user_id": 2}], [(1, 3)])
    with pytest.raises(DataError, match="unknown user 3"):
        load_dataset(posts, edges)


def test_load_rejects_self_loop(tmp_path):
    posts, edges = write_files(tmp_path, [{"user_id": 1}], [(1, 1)])
    with pytest.raises(DataError, match="self-loop"):
        load_dataset(posts, edges)


def test_load_validates_image_probs(tmp_path):
    posts, edges = write_files(tmp_path, [{"user_id": 1, "image_probs": [[400, 0.5]]}], [])
    with pytest.raises(DataError, match="category 400"):
        load_dataset(posts, edges)
    posts2, edges2 = write_files(tmp_path, [{"user_id": 1, "image_probs": [[1, 0.8], [2, 0.4]]}], [])
    with pytest.raises(DataError, match="sum"):
        load_dataset(posts2, edges2)


def test_duplicate_post_id_rejected():
    p = Post(post_id=1, author=1, hashtags=(), tokens=())
    with pytest.raises(DataError, match="duplicate post id"):
        make_dataset([1], [p, p], [])


def test_nearest_rank_percentile():
    vals = list(range(1, 101))
    assert nearest_rank(vals, 0.10) == 10
    assert nearest_rank(vals, 0.90) == 90
    assert nearest_rank([5], 0.10) == 5
    assert nearest_rank([5], 0.90) == 5


def test_filter_accounts_window():
    # a clique of k users has degree k-1; mix three clique sizes so the degree
    # multiset is controlled exactly, then check the strict percentile window
    users = []
    edges = []
    base = 0
    for size in (2, 6, 20):  # degrees 1, 5, 19
        block = list(range(base, base + size))
        users.extend(block)
        edges.extend((a, b) for i, a in enumerate(block) for b in block[i + 1:])
        base += size
    posts = [Post(post_id=u + 1, author=u, hashtags=(), tokens=()) for u in users]
    d = make_dataset(users, posts, edges)
    degrees = sorted(d.degrees[u] for u in users)  # 2x1, 6x5, 20x19
    lo = nearest_rank(degrees, 0.10)  # rank 3 -> 5
    hi = nearest_rank(degrees, 0.90)  # rank ceil(25.2)=26 -> 19
    assert (lo, hi) == (5, 19)
    filtered = filter_accounts(d, 0.10, 0.90)
    kept_degrees = {d.degrees[u] for u in filtered.users}
    assert kept_degrees == {5, 19}  # strictly-below-5 users dropped
    assert all(p.author in set(filtered.users) for p in filtered.posts)


def test_filter_accounts_equal_degrees_noop():
    users = [0, 1, 2, 3]
    edges = [(0, 1), (2, 3)]
    posts = [Post(post_id=u + 1, author=u, hashtags=(), tokens=()) for u in users]
    d = make_dataset(users, posts, edges)
    out = filter_accounts(d)
    assert out.users == d.users and out.edges == d.edges


def test_filter_accounts_single_user():
    d = make_dataset([7], [Post(post_id=1, author=7, hashtags=(), tokens=())], [])
    out = filter_accounts(d)
    assert out.users == (7,)


def _tag_dataset(tag_users):
    """tag -> list of (user, times) pairs."""
    posts = []
    users = set()
    pid = 0
    for tag, usages in tag_users.items():
        for u, times in usages:
            users.add(u)
            for _ in range(times):
                pid += 1
                posts.append(Post(post_id=pid, author=u, hashtags=(tag,), tokens=()))
    return make_dataset(users, posts, [])


def test_filter_hashtags_rules():
    d = _tag_dataset({
        "solo": [(1, 5)],
        "ok": [(1, 1), (2, 1)],
        "wide": [(u, 1) for u in range(3, 15)],  # 12 users
    })
    out = filter_hashtags(d, 2, 10)
    assert set(out.hashtag_users) == {"ok"}


def test_filter_hashtags_boundaries_inclusive():
    d = _tag_dataset({
        "two": [(u, 1) for u in range(2)],
        "ten": [(u, 1) for u in range(10, 20)],
    })
    out = filter_hashtags(d, 2, 10)
    assert set(out.hashtag_users) == {"two", "ten"}


def test_filter_hashtags_user_counts_rule():
    d = _tag_dataset({
        "a": [(1, 1)],
        "b": [(u, 1) for u in range(5)],
        "c": [(u, 1) for u in range(11)],
    })
    out = filter_hashtags(d, 2, 10)
    assert set(out.hashtag_users) == {"b"}


def _token_dataset(counts):
    posts = []
    users = set()
    pid = 0
    for token, user_list in counts.items():
        for u in user_list:
            users.add(u)
            pid += 1
            posts.append(Post(post_id=pid, author=u, hashtags=(), tokens=(token,)))
    return make_dataset(users, posts, [])


def test_filter_tokens_rules():
    d = _token_dataset({
        "rare": [1],
        "mid": list(range(50)),
        "wide": list(range(101)),
    })
    out = filter_tokens(d, 2, 100)
    vocab = {t for c in out.token_counts.values() for t in c}
    assert vocab == {"mid"}
    # boundaries inclusive
    d2 = _token_dataset({"two": [1, 2], "hundred": list(range(100))})
    out2 = filter_tokens(d2, 2, 100)
    vocab2 = {t for c in out2.token_counts.values() for t in c}
    assert vocab2 == {"two", "hundred"}
    # empty vocabulary allowed
    out3 = filter_tokens(_token_dataset({"solo": [1]}), 2, 100)
    assert all(not c for c in out3.token_counts.values())


def test_filter_location_users():
    posts = []
    pid = 0
    # user 1: 25 check-ins at one venue -> ineligible
    for _ in range(25):
        pid += 1
        posts.append(Post(post_id=pid, author=1, hashtags=(), tokens=(), location=5))
    # user 2: 20 check-ins over 2 venues -> eligible (boundary)
    for i in range(20):
        pid += 1
        posts.append(Post(post_id=pid, author=2, hashtags=(), tokens=(), location=5 + (i % 2)))
    # user 3: 19 check-ins over 3 venues -> ineligible
    for i in range(19):
        pid += 1
        posts.append(Post(post_id=pid, author=3, hashtags=(), tokens=(), location=i % 3))
    d = make_dataset([1, 2, 3], posts, [])
    assert filter_location_users(d) == frozenset({2})


def test_filter_location_users_matches_naive_scan():
    rng = np.random.default_rng(5)
    posts = []
    pid = 0
    for u in range(12):
        for _ in range(int(rng.integers(0, 40))):
            pid += 1
            loc = int(rng.integers(0, 4)) if rng.random() < 0.8 else None
            posts.append(Post(post_id=pid, author=u, hashtags=(), tokens=(), location=loc))
    d = make_dataset(range(12), posts, [])
    eligible = filter_location_users(d, 2, 20)
    # naive recount straight off the posts
    per_user = {}
    for p in posts:
        if p.location is not None:
            per_user.setdefault(p.author, []).append(p.location)
    naive = {u for u, locs in per_user.items() if len(set(locs)) >= 2 and len(locs) >= 20}
    assert eligible == frozenset(naive)


@st.composite
def small_datasets(draw):
    n_users = draw(st.integers(min_value=1, max_value=8))
    users = list(range(n_users))
    posts = []
    pid = 0
    for u in users:
        for _ in range(draw(st.integers(min_value=0, max_value=3))):
            pid += 1
            tags = tuple(draw(st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=3)))
            toks = tuple(draw(st.lists(st.sampled_from(["tok1", "tok2", "tok3"]), max_size=3)))
            posts.append(Post(post_id=pid, author=u, hashtags=tags, tokens=toks))
    edges = []
    for i in range(n_users):
        for j in range(i + 1, n_users):
            if draw(st.booleans()):
                edges.append((i, j))
    return make_dataset(users, posts, edges)


@given(small_datasets())
@settings(max_examples=60, deadline=None)
def test_content_filters_idempotent(d):
    once = filter_hashtags(d, 2, 3)
    twice = filter_hashtags(once, 2, 3)
    assert once.hashtag_users == twice.hashtag_users
    assert [p.hashtags for p in once.posts] == [p.hashtags for p in twice.posts]
    t_once = filter_tokens(d, 2, 2)
    t_twice = filter_tokens(t_once, 2, 2)
    assert t_once.token_counts == t_twice.token_counts


@given(small_datasets())
@settings(max_examples=60, deadline=None)
def test_filter_hashtags_never_increases_counts(d):
    out = filter_hashtags(d, 2, 3)
    for u, counts in out.hashtag_counts.items():
        for h, c in counts.items():
            assert c <= d.hashtag_counts[u][h]


def _pairable_dataset(n=8, with_edges=True):
    posts = []
    pid = 0
    for u in range(n):
        pid += 1
        posts.append(Post(post_id=pid, author=u, hashtags=("shared",),
                          tokens=("hello", "world")))
    edges = [(i, i + 1) for i in range(n - 1)] if with_edges else []
    return make_dataset(range(n), posts, edges)


def test_build_pairs_balanced_and_nonadjacent():
    d = _pairable_dataset(10)
    pairs = build_pairs(d, seed=3)
    pos = [p for p in pairs if p.label == 1]
    neg = [p for p in pairs if p.label == 0]
    assert len(pos) == len(neg) == len(d.edges)
    for p in neg:
        assert (p.u, p.v) not in d.edges
        assert p.u != p.v
        assert any(p.avail.values())


def test_build_pairs_deterministic():
    d = _pairable_dataset(10)
    assert build_pairs(d, seed=11) == build_pairs(d, seed=11)
    assert build_pairs(d, seed=11) != build_pairs(d, seed=12)


def test_build_pairs_complete_graph_errors():
    users = range(5)
    posts = [Post(post_id=u + 1, author=u, hashtags=("x",), tokens=("t1", "t2")) for u in users]
    edges = [(i, j) for i in users for j in users if i < j]
    d = make_dataset(users, posts, edges)
    with pytest.raises(DataError, match="deficit"):
        build_pairs(d, seed=0)


def test_build_pairs_hashtag_flag_needs_common_tag():
    posts = [
        Post(post_id=1, author=0, hashtags=("a",), tokens=("t1", "t2")),
        Post(post_id=2, author=1, hashtags=("b",), tokens=("t1", "t2")),
        Post(post_id=3, author=2, hashtags=("a",), tokens=("t1", "t2")),
        Post(post_id=4, author=3, hashtags=("b",), tokens=("t1", "t2")),
        Post(post_id=5, author=4, hashtags=("a",), tokens=("t1", "t2")),
    ]
    d = make_dataset(range(5), posts, [(0, 1), (0, 2)])
    pairs = build_pairs(d, seed=0)
    by_pair = {(p.u, p.v): p for p in pairs if p.label == 1}
    assert not by_pair[(0, 1)].avail["H"]  # no common hashtag
    assert by_pair[(0, 2)].avail["H"]
    assert by_pair[(0, 1)].avail["T"]
