import numpy as np
import pytest

from linkfuse.dataset import Post, build_pairs, make_dataset
from linkfuse.embed import EmbedConfig
from linkfuse.errors import ConfigError, DataError
from linkfuse.walkfeat import (location_features, network_features,
                               scan_walks_for_edges)

_CFG = EmbedConfig(dim=12, walks_per_node=4, walk_length=15, window=3,
                   negatives=3, epochs=2)


def _checkin_dataset():
    """Users 0..5: two venues-sharing groups plus one ineligible user."""
    posts = []
    pid = 0

    def checkins(user, venues, times):
        nonlocal pid
        for v in venues * times:
            pid += 1
            posts.append(Post(post_id=pid, author=user, hashtags=(), tokens=(),
                              location=v))

    checkins(0, [10, 11], 12)  # 24 check-ins over 2 venues
    checkins(1, [10, 11], 12)  # same venues as user 0
    checkins(2, [20, 21], 12)
    checkins(3, [20, 21], 12)
    checkins(4, [30, 31], 12)
    checkins(5, [40], 25)  # one venue only: ineligible
    edges = [(0, 1), (2, 3), (0, 2), (1, 3), (4, 5)]
    return make_dataset(range(6), posts, edges)


def test_location_eligibility_gate():
    d = _checkin_dataset()
    pairs = build_pairs(d, seed=0)
    res = location_features(d, pairs, _CFG, seed=1)
    by_pair = {(p.u, p.v): i for i, p in enumerate(pairs)}
    assert res.eligible == frozenset({0, 1, 2, 3, 4})
    for (u, v), i in by_pair.items():
        if 5 in (u, v):
            assert not res.table.available[i]


def test_location_identical_checkins_high_cosine():
    d = _checkin_dataset()
    pairs = build_pairs(d, seed=0)
    res = location_features(d, pairs, _CFG, seed=1)
    cos_col = res.table.names.index("cosine")
    avail = res.table.available
    cosines = res.table.values[avail, cos_col]
    by_pair = {(p.u, p.v): i for i, p in enumerate(pairs)}
    same_venue_pair = by_pair[(0, 1)]
    assert res.table.available[same_venue_pair]
    assert res.table.values[same_venue_pair, cos_col] > cosines.mean()


def test_location_deterministic():
    d = _checkin_dataset()
    pairs = build_pairs(d, seed=0)
    a = location_features(d, pairs, _CFG, seed=5)
    b = location_features(d, pairs, _CFG, seed=5)
    np.testing.assert_array_equal(a.table.values, b.table.values)
    np.testing.assert_array_equal(a.table.available, b.table.available)


def _social_dataset(n=10):
    posts = [Post(post_id=u + 1, author=u, hashtags=(), tokens=("tk1", "tk2"))
             for u in range(n)]
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if (i + j) % 3 == 0 or j == i + 1]
    return make_dataset(range(n), posts, edges)


def test_network_split_and_leakage():
    d = _social_dataset()
    pairs = build_pairs(d, seed=2)
    res = network_features(d, pairs, train_edge_fraction=0.8, cfg=_CFG, seed=3)
    assert set(res.kept_edges) | set(res.held_out_edges) == set(d.edges)
    assert not set(res.kept_edges) & set(res.held_out_edges)
    assert len(res.kept_edges) == int(np.floor(0.8 * len(d.edges) + 1e-9))
    assert scan_walks_for_edges(res.walks, res.held_out_edges) == 0
    # kept edges do get walked
    assert scan_walks_for_edges(res.walks, res.kept_edges) > 0


def test_network_full_fraction_keeps_everything():
    d = _social_dataset()
    pairs = build_pairs(d, seed=2)
    res = network_features(d, pairs, train_edge_fraction=1.0, cfg=_CFG, seed=3)
    assert set(res.kept_edges) == set(d.edges)
    assert res.held_out_edges == ()


def test_network_held_out_pair_still_has_features():
    d = _social_dataset()
    pairs = build_pairs(d, seed=2)
    res = network_features(d, pairs, train_edge_fraction=0.6, cfg=_CFG, seed=1)
    held = set(res.held_out_edges)
    by_pair = {(p.u, p.v): i for i, p in enumerate(pairs)}
    covered = [by_pair[e] for e in held if e in by_pair]
    assert covered, "expected at least one held-out edge among the pair samples"
    assert all(res.table.available[i] for i in covered)


def test_network_deterministic_and_fraction_validated():
    d = _social_dataset(9)
    pairs = build_pairs(d, seed=0)
    a = network_features(d, pairs, 0.8, _CFG, seed=9)
    b = network_features(d, pairs, 0.8, _CFG, seed=9)
    np.testing.assert_array_equal(a.table.values, b.table.values)
    assert a.kept_edges == b.kept_edges
    with pytest.raises(ConfigError):
        network_features(d, pairs, 0.0, _CFG, seed=0)
    with pytest.raises(ConfigError):
        network_features(d, pairs, 1.2, _CFG, seed=0)


def test_network_requires_edges():
    posts = [Post(post_id=1, author=0, hashtags=(), tokens=("tk1", "tk2")),
             Post(post_id=2, author=1, hashtags=(), tokens=("tk1", "tk2"))]
    d = make_dataset([0, 1], posts, [])
    with pytest.raises(DataError):
        network_features(d, (), 0.8, _CFG, seed=0)


def test_hadamard_table_symmetric_in_pair_order():
    d = _social_dataset(8)
    pairs = build_pairs(d, seed=4)
    res = network_features(d, pairs, 0.8, _CFG, seed=4)
    emb = res.embedding
    for p in pairs[:5]:
        vu, vv = emb.vector(p.u), emb.vector(p.v)
        if vu is None or vv is None:
            continue
        np.testing.assert_array_equal(vu * vv, vv * vu)
