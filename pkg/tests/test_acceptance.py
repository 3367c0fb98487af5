"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. The signal-recovery and fusion criteria train real models on the
default synthetic network, so this module takes several minutes.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from linkfuse import imgfeat, tagfeat, textfeat, walkfeat
from linkfuse.cli import main as cli_main
from linkfuse.dataset import MODALITIES, build_pairs, preprocess
from linkfuse.distances import distance_profile
from linkfuse.embed import EmbedConfig, pair_grads, pair_loss
from linkfuse.evaluate import auc, cross_validate
from linkfuse.fusion import enumerate_subsets, evaluate_fusion, fuse_scores
from linkfuse.robustness import robustness_sweep
from linkfuse.synth import SynthConfig, generate
from oracles import naive_hashtag_features, naive_image_features

FUSION_SEEDS = (42, 43, 44)


def _report(criterion: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {criterion}: {status}  {detail}")
    assert ok, f"{criterion} failed: {detail}"


# --- shared experiment worlds -------------------------------------------------

def _build_world(synth_seed: int):
    t0 = time.time()
    d_raw, _ = generate(SynthConfig(seed=synth_seed))
    snap = preprocess(d_raw)
    pairs = build_pairs(snap, seed=0)
    tables = {
        "H": tagfeat.hashtag_feature_table(tagfeat.build_hashtag_index(snap), pairs),
        "T": textfeat.text_feature_table(textfeat.tfidf(snap), pairs),
        "I": imgfeat.image_feature_table(imgfeat.build_category_index(snap), pairs),
    }
    loc = walkfeat.location_features(snap, pairs, EmbedConfig(), seed=1)
    net = walkfeat.network_features(snap, pairs, 0.8, EmbedConfig(), seed=2)
    tables["L"] = loc.table
    tables["E"] = net.table
    cv = {m: cross_validate(pairs, tables[m], folds=5, seed=0) for m in MODALITIES}
    return {
        "raw": d_raw,
        "pairs": pairs,
        "tables": tables,
        "network": net,
        "cv": cv,
        "build_seconds": time.time() - t0,
    }


@pytest.fixture(scope="module")
def world42():
    return _build_world(42)


# --- criterion 1: AUC oracle equivalence --------------------------------------

def _brute_force_auc(labels, scores):
    pos = scores[labels == 1][:, None]
    neg = scores[labels == 0][None, :]
    wins = float((pos > neg).sum()) + 0.5 * float((pos == neg).sum())
    return wins / (pos.size * neg.size)


def test_criterion_1_auc_oracle_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.time()
    checked = 0
    for _ in range(1000):
        n = int(rng.integers(2, 201))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        # coarse score grid guarantees ties
        scores = np.round(rng.random(n), int(rng.integers(0, 3)))
        assert auc(labels, scores) == _brute_force_auc(labels, scores)
        checked += 1
    elapsed = time.time() - t0
    _report("1 (AUC oracle equivalence)", checked == 1000 and elapsed < 5.0,
            f"{checked} instances exactly equal in {elapsed:.2f}s")


# --- criterion 2: feature oracle equivalence ----------------------------------

def _random_tag_world(rng, n_users):
    """Every tag is planted on >= 2 users so the popularity precondition holds."""
    posts = {u: [[] for _ in range(int(rng.integers(2, 5)))] for u in range(n_users)}
    n_tags = int(rng.integers(3, 9))
    for t in range(n_tags):
        size = int(rng.integers(2, min(n_users, 6) + 1))
        owners = rng.choice(n_users, size=size, replace=False)
        for u in owners:
            for _ in range(int(rng.integers(1, 4))):
                post_idx = int(rng.integers(0, len(posts[int(u)])))
                posts[int(u)][post_idx].append(f"t{t}")
    return posts


def test_criterion_2_feature_oracle_equivalence():
    from linkfuse.dataset import PairSample, Post, make_dataset

    rng = np.random.default_rng(77)
    checked_tag = checked_dist = checked_img = 0
    for _ in range(50):
        n_users = int(rng.integers(3, 11))

        # hashtag features vs the naive oracle
        tag_posts = _random_tag_world(rng, n_users)
        posts = []
        pid = 0
        for u in sorted(tag_posts):
            for tags in tag_posts[u]:
                pid += 1
                posts.append(Post(post_id=pid, author=u, hashtags=tuple(tags), tokens=()))
        d = make_dataset(range(n_users), posts, [])
        idx = tagfeat.build_hashtag_index(d)
        for u in range(n_users):
            for v in range(u + 1, n_users):
                cu = d.hashtag_counts.get(u, {})
                cv = d.hashtag_counts.get(v, {})
                if not cu or not cv or set(cu).isdisjoint(cv):
                    continue
                pair = PairSample(u, v, 1, {m: m == "H" for m in MODALITIES})
                got = tagfeat.hashtag_features(idx, pair)
                want = naive_hashtag_features(tag_posts, u, v)
                np.testing.assert_allclose(got, want, rtol=1e-9)
                checked_tag += 1

        # the eight distance measures vs the naive oracle
        from oracles import naive_distance_profile

        dim = int(rng.integers(1, 12))
        x = rng.normal(size=dim) * rng.choice([0.0, 1.0], size=dim)
        y = rng.normal(size=dim) * rng.choice([0.0, 1.0], size=dim)
        np.testing.assert_allclose(distance_profile(x, y),
                                   naive_distance_profile(x.tolist(), y.tolist()),
                                   rtol=1e-9, atol=1e-12)
        checked_dist += 1

        # all 368 image features vs the naive oracle
        images = {}
        for u in range(n_users):
            imgs = []
            for _ in range(int(rng.integers(1, 4))):
                k = int(rng.integers(1, 5))
                cats = rng.choice(365, size=k, replace=False)
                mass = rng.dirichlet(np.ones(k)) * 0.95
                imgs.append([(int(c), float(p)) for c, p in zip(cats, mass)])
            images[u] = imgs
        posts = []
        pid = 0
        for u in sorted(images):
            for image in images[u]:
                pid += 1
                posts.append(Post(post_id=pid, author=u, hashtags=(), tokens=(),
                                  image_probs=tuple(image)))
        d_img = make_dataset(range(n_users), posts, [])
        cat_idx = imgfeat.build_category_index(d_img, threshold=0.05, n_categories=365)
        u, v = 0, 1
        pair = PairSample(u, v, 1, {m: m == "I" for m in MODALITIES})
        got = imgfeat.image_features(cat_idx, pair)
        want = naive_image_features(images, u, v, 0.05, 365)
        assert len(got) == 368
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=0)
        checked_img += 1

    _report("2 (feature oracle equivalence)",
            checked_tag > 100 and checked_dist == 50 and checked_img == 50,
            f"{checked_tag} hashtag pairs, {checked_dist} distance profiles, "
            f"{checked_img} image vectors matched to 1e-9")


# --- criterion 3: skip-gram gradient check ------------------------------------

def test_criterion_3_skipgram_gradient_check():
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(5):
        dim = int(rng.integers(4, 24))
        n_out = int(rng.integers(2, 8))
        center = rng.normal(scale=0.6, size=dim)
        out = rng.normal(scale=0.6, size=(n_out, dim))
        labels = np.zeros(n_out)
        labels[0] = 1.0
        g_center, g_out = pair_grads(center, out, labels)
        eps = 1e-6
        for i in range(dim):
            up, down = center.copy(), center.copy()
            up[i] += eps
            down[i] -= eps
            fd = (pair_loss(up, out, labels) - pair_loss(down, out, labels)) / (2 * eps)
            worst = max(worst, abs(fd - g_center[i]) / max(abs(fd), 1e-8))
        for r in range(n_out):
            up, down = out.copy(), out.copy()
            up[r, 0] += eps
            down[r, 0] -= eps
            fd = (pair_loss(center, up, labels) - pair_loss(center, down, labels)) / (2 * eps)
            worst = max(worst, abs(fd - g_out[r, 0]) / max(abs(fd), 1e-8))
    _report("3 (skip-gram gradient check)", worst < 1e-4,
            f"max relative error {worst:.2e} over 5 random points")


# --- criterion 4: signal recovery on the default synthetic network ------------

def test_criterion_4_signal_recovery(world42):
    cv = world42["cv"]
    aucs = {m: cv[m].mean_auc for m in MODALITIES}
    elapsed = world42["build_seconds"]
    all_above = all(a >= 0.65 for a in aucs.values())
    ordering = aucs["H"] >= aucs["I"]
    _report("4 (signal recovery)", all_above and ordering and elapsed < 600,
            " ".join(f"{m}={a:.4f}" for m, a in aucs.items())
            + f" build+train {elapsed:.0f}s")


# --- criterion 5: fusion dominance ---------------------------------------------

def test_criterion_5_fusion_dominance(world42):
    fused, baseline, max_mono = [], [], []
    for seed in FUSION_SEEDS:
        world = world42 if seed == 42 else _build_world(seed)
        ev = evaluate_fusion(world["pairs"], world["tables"], subset=MODALITIES,
                             folds=5, seed=0)
        fused.append(ev.mean_auc)
        baseline.append(ev.baseline_mean_auc)
        max_mono.append(max(world["cv"][m].mean_auc for m in MODALITIES))
    mean_fused = float(np.mean(fused))
    mean_base = float(np.mean(baseline))
    mean_max = float(np.mean(max_mono))
    ok = mean_fused >= mean_max - 0.01 and mean_fused >= mean_base - 0.005
    _report("5 (fusion dominance)", ok,
            f"fused={mean_fused:.4f} max_mono={mean_max:.4f} baseline={mean_base:.4f} "
            f"over seeds {FUSION_SEEDS}")


# --- criterion 6: fusion algebra -----------------------------------------------

def test_criterion_6_fusion_algebra():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(500):
        k = int(rng.integers(1, 6))
        mods = tuple(MODALITIES[:k])
        posteriors = {m: float(rng.random()) for m in mods}
        conf_equal = {m: 0.7 for m in MODALITIES}
        s_equal = fuse_scores(posteriors, conf_equal, MODALITIES)
        baseline = float(np.mean(list(posteriors.values())))
        worst = max(worst, abs(s_equal - baseline))
        # singleton subsets reproduce the raw posterior exactly
        conf = {m: float(rng.random()) for m in MODALITIES}
        for m in mods:
            assert fuse_scores(posteriors, conf, (m,)) == posteriors[m]
    subsets = enumerate_subsets()
    n_mid = sum(1 for s in subsets if 2 <= len(s) <= 4)
    ok = worst <= 1e-12 and n_mid == 25
    _report("6 (fusion algebra)", ok,
            f"equal-confidence gap {worst:.2e}; {n_mid} subsets of size 2-4")


# --- criterion 7: robustness shape ----------------------------------------------

def test_criterion_7_robustness_shape(world42):
    cells = robustness_sweep(world42["raw"],
                             removal_fractions=(0.1, 0.2, 0.3, 0.4, 0.5),
                             seed=0, pair_seed=0, n_removal_seeds=3)
    by_key = {(c.fraction, c.attack): c.mean_auc for c in cells}
    gaps = {}
    for attack in ("H", "T", "fusion_HTI"):
        gaps[attack] = abs(by_key[(0.0, attack)] - by_key[(0.5, attack)])
    ok = all(g <= 0.10 for g in gaps.values())
    _report("7 (robustness shape)", ok,
            " ".join(f"{a}: |drop|={g:.4f}" for a, g in gaps.items()))


# --- criterion 8: partial-network leakage --------------------------------------

def test_criterion_8_no_heldout_edge_leakage(world42):
    net = world42["network"]
    hits = walkfeat.scan_walks_for_edges(net.walks, net.held_out_edges)
    covered = walkfeat.scan_walks_for_edges(net.walks, net.kept_edges)
    _report("8 (held-out edge leakage)", hits == 0 and covered > 0,
            f"{hits} held-out traversals across {len(net.walks)} walks "
            f"({len(net.held_out_edges)} edges held out)")


# --- criterion 9: pipeline determinism ------------------------------------------

_CFG = """
[synth]
n_users = 70
n_communities = 4
p_in = 0.4
p_out = 0.012
posts_per_user = 16.0
vocab_size = 500
n_hashtags = 160
n_locations = 44
n_categories = 30
pair_signal_rate = 0.8
seed = 11

[filters]
loc_min_checkins = 5

[images]
n_categories = 30

[embed]
dim = 16
walks_per_node = 3
walk_length = 12
window = 3
negatives = 3
epochs = 2

[eval]
n_trees = 12
folds = 3

[robustness]
n_removal_seeds = 1
"""


def _run_full_chain(workdir: Path, config: str) -> Path:
    data = workdir / "data"
    snap = workdir / "snap"
    cmds = [
        ["synth", "--config", config, "--out", str(data)],
        ["ingest", "--posts", str(data / "posts.jsonl"),
         "--edges", str(data / "edges.csv"), "--out", str(snap),
         "--seed", "0", "--config", config],
        ["features", "--snapshot", str(snap), "--modality", "all",
         "--seed", "0", "--config", config],
    ]
    for m in MODALITIES:
        cmds.append(["attack", "--snapshot", str(snap), "--modality", m,
                     "--seed", "0", "--config", config])
    cmds.extend([
        ["fuse", "--snapshot", str(snap), "--subset", "all",
         "--seed", "0", "--config", config],
        ["robustness", "--snapshot", str(snap), "--steps", "20,40",
         "--seed", "0", "--config", config],
    ])
    for cmd in cmds:
        assert cli_main(cmd) == 0, f"command failed: {cmd}"
    return snap


def test_criterion_9_pipeline_determinism(tmp_path):
    config = tmp_path / "cfg.ini"
    config.write_text(_CFG)
    snap_a = _run_full_chain(tmp_path / "a", str(config))
    snap_b = _run_full_chain(tmp_path / "b", str(config))
    compared = 0
    mismatched = []
    for path in sorted(snap_a.iterdir()):
        other = snap_b / path.name
        if not other.exists() or other.read_bytes() != path.read_bytes():
            mismatched.append(path.name)
        compared += 1
    _report("9 (pipeline determinism)", compared >= 15 and not mismatched,
            f"{compared} artifacts byte-identical" if not mismatched
            else f"mismatch in {mismatched}")
