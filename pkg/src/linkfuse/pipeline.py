"""Snapshot-directory orchestration shared by the CLI and the experiment scripts.

A snapshot directory is created by ``ingest`` and then enriched in place:

    raw_posts.jsonl / raw_edges.csv   copies of the ingested inputs
    posts.jsonl / edges.csv           the filtered dataset
    pairs.csv                         pair samples with availability flags
    meta.json                         seeds, parameters, counts
    features_<M>.csv                  per-modality feature tables
    embedding_L.csv / embedding_E.csv persisted user vectors
    network_split.csv                 which published edges entered the partial graph
    results_attack_<M>.csv            per-fold attack AUCs
    results_fusion.csv                fused / baseline / subset AUCs
    scores_fusion.csv                 per-pair posteriors and fused scores
    results_robustness.csv            removal sweep

Every writer emits floats via repr and iterates in sorted order, so identical
invocations produce byte-identical files.
"""

from __future__ import annotations

import configparser
import csv
import json
import shutil
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import imgfeat, robustness, tagfeat, textfeat, walkfeat
from .dataset import (MODALITIES, Dataset, PairSample, build_pairs, load_dataset,
                      preprocess)
from .embed import EmbedConfig, save_embedding
from .errors import ConfigError, DataError
from .evaluate import cross_validate
from .fusion import enumerate_subsets, evaluate_fusion_subsets
from .synth import SynthConfig, write_dataset_files
from .tables import FeatureTable, read_features_csv, write_features_csv


@dataclass(frozen=True)
class PipelineConfig:
    account_low_pct: float = 0.10
    account_high_pct: float = 0.90
    tag_min_users: int = 2
    tag_max_users: int = 10
    token_min_users: int = 2
    token_max_users: int = 100
    loc_min_distinct: int = 2
    loc_min_checkins: int = 20
    image_threshold: float = 0.05
    n_categories: int = 365
    n_trees: int = 100
    folds: int = 5
    inner_split: float = 0.8
    train_edge_fraction: float = 0.8
    n_removal_seeds: int = 3
    embed: EmbedConfig = field(default_factory=EmbedConfig)


_SECTION_TARGETS = {
    "filters": ("account_low_pct", "account_high_pct", "tag_min_users", "tag_max_users",
                "token_min_users", "token_max_users", "loc_min_distinct", "loc_min_checkins"),
    "images": ("image_threshold", "n_categories"),
    "eval": ("n_trees", "folds", "inner_split"),
    "network": ("train_edge_fraction",),
    "robustness": ("n_removal_seeds",),
}


def _coerce(raw: str, target_type):
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw


def load_config(path=None) -> tuple[PipelineConfig, SynthConfig]:
    """Parse the flat key-value config file (INI sections); unknown keys fail fast."""
    pipeline = PipelineConfig()
    synth_cfg = SynthConfig()
    if path is None:
        return pipeline, synth_cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    pipe_fields = {f.name: f.type for f in fields(PipelineConfig)}
    updates = {}
    for section, keys in _SECTION_TARGETS.items():
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            target = int if pipe_fields[key] == "int" else float
            updates[key] = _coerce(raw, target)
    if parser.has_section("embed"):
        embed_fields = {f.name: f.type for f in fields(EmbedConfig)}
        embed_updates = {}
        for key, raw in parser.items("embed"):
            if key not in embed_fields:
                raise ConfigError(f"unknown key {key!r} in [embed]")
            target = int if embed_fields[key] == "int" else float
            embed_updates[key] = _coerce(raw, target)
        updates["embed"] = replace(EmbedConfig(), **embed_updates)
    if parser.has_section("synth"):
        synth_fields = {f.name: f.type for f in fields(SynthConfig)}
        synth_updates = {}
        for key, raw in parser.items("synth"):
            if key not in synth_fields:
                raise ConfigError(f"unknown key {key!r} in [synth]")
            target = int if synth_fields[key] == "int" else float
            synth_updates[key] = _coerce(raw, target)
        synth_cfg = replace(synth_cfg, **synth_updates)
    known_sections = set(_SECTION_TARGETS) | {"embed", "synth"}
    unknown = set(parser.sections()) - known_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    try:
        cfg = replace(pipeline, **updates)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.embed.validate()
    synth_cfg.validate()
    return cfg, synth_cfg


def _write_pairs_csv(pairs, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "v", "label"] + list(MODALITIES))
        for p in pairs:
            writer.writerow([p.u, p.v, p.label] + [int(p.avail[m]) for m in MODALITIES])


def _read_pairs_csv(path) -> tuple[PairSample, ...]:
    pairs = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["u", "v", "label"] + list(MODALITIES):
            raise DataError(f"{path}: unexpected pairs header {header}")
        for row in reader:
            avail = {m: bool(int(row[3 + i])) for i, m in enumerate(MODALITIES)}
            pairs.append(PairSample(int(row[0]), int(row[1]), int(row[2]), avail))
    return tuple(pairs)


def modality_counts(d: Dataset, pairs, loc_min_distinct: int = 2,
                    loc_min_checkins: int = 20) -> dict:
    """Preprocessed data statistics in the shape of the per-modality count tables."""
    from .dataset import filter_location_users

    eligible = filter_location_users(d, loc_min_distinct, loc_min_checkins)
    friend = [p for p in pairs if p.label == 1]
    out = {
        "users": d.n_users,
        "posts": len(d.posts),
        "edges": len(d.edges),
        "friend_pairs": len(friend),
        "stranger_pairs": len(pairs) - len(friend),
    }
    per_mod = {
        "H": {"users": len(d.hashtag_counts), "items": len(d.hashtag_users)},
        "T": {"users": len(d.token_counts),
              "items": len({t for c in d.token_counts.values() for t in c})},
        "I": {"users": len(d.image_counts), "items": sum(d.image_counts.values())},
        "L": {"users": len(eligible),
              "items": len({l for c in d.location_counts.values() for l in c})},
        "E": {"users": len({u for e in d.edges for u in e}), "items": len(d.edges)},
    }
    for m in MODALITIES:
        per_mod[m]["friend_pairs"] = sum(1 for p in friend if p.avail[m])
    out["modalities"] = per_mod
    return out


def ingest(posts_path, edges_path, out_dir, seed: int, cfg: PipelineConfig) -> dict:
    """Load, filter, sample pairs, and persist the snapshot; returns the counts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(posts_path, out / "raw_posts.jsonl")
    shutil.copyfile(edges_path, out / "raw_edges.csv")
    d = load_dataset(posts_path, edges_path, n_categories=cfg.n_categories)
    snap = preprocess(d, cfg.account_low_pct, cfg.account_high_pct,
                      cfg.tag_min_users, cfg.tag_max_users,
                      cfg.token_min_users, cfg.token_max_users)
    pairs = build_pairs(snap, seed, cfg.loc_min_distinct, cfg.loc_min_checkins)
    write_dataset_files(snap, out / "posts.jsonl", out / "edges.csv")
    _write_pairs_csv(pairs, out / "pairs.csv")
    counts = modality_counts(snap, pairs, cfg.loc_min_distinct, cfg.loc_min_checkins)
    meta = {"seed": seed, "counts": counts, "config": _config_payload(cfg)}
    with open(out / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
    return counts


def _config_payload(cfg: PipelineConfig) -> dict:
    payload = asdict(cfg)
    return payload


def load_snapshot(snap_dir) -> tuple[Dataset, tuple[PairSample, ...], PipelineConfig]:
    snap = Path(snap_dir)
    meta_path = snap / "meta.json"
    if not meta_path.exists():
        raise DataError(f"snapshot {snap} is missing meta.json (run ingest first)")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    raw_cfg = dict(meta.get("config", {}))
    embed_cfg = EmbedConfig(**raw_cfg.pop("embed", {}))
    cfg = PipelineConfig(embed=embed_cfg, **raw_cfg)
    d = load_dataset(snap / "posts.jsonl", snap / "edges.csv", n_categories=cfg.n_categories)
    pairs = _read_pairs_csv(snap / "pairs.csv")
    return d, pairs, cfg


def compute_features(snap_dir, modality: str, seed: int,
                     cfg: PipelineConfig | None = None) -> FeatureTable:
    """Compute and persist one modality's feature table (plus embedding artifacts)."""
    snap = Path(snap_dir)
    d, pairs, stored_cfg = load_snapshot(snap)
    cfg = cfg or stored_cfg
    if modality == "H":
        table = tagfeat.hashtag_feature_table(tagfeat.build_hashtag_index(d), pairs)
    elif modality == "T":
        table = textfeat.text_feature_table(textfeat.tfidf(d), pairs)
    elif modality == "I":
        idx = imgfeat.build_category_index(d, cfg.image_threshold, cfg.n_categories)
        table = imgfeat.image_feature_table(idx, pairs)
    elif modality == "L":
        result = walkfeat.location_features(d, pairs, cfg.embed, seed,
                                            cfg.loc_min_distinct, cfg.loc_min_checkins)
        table = result.table
        user_nodes = [n for n in result.embedding.nodes if n[0] == "u"]
        ids = [n[1] for n in user_nodes]
        rows = np.array([result.embedding.vector(n) for n in user_nodes]) if user_nodes \
            else np.zeros((0, cfg.embed.dim))
        save_embedding(snap / "embedding_L.csv", ids, rows)
    elif modality == "E":
        result = walkfeat.network_features(d, pairs, cfg.train_edge_fraction,
                                           cfg.embed, seed)
        table = result.table
        ids = list(result.embedding.nodes)
        rows = result.embedding.matrix
        save_embedding(snap / "embedding_E.csv", ids, rows)
        kept = set(result.kept_edges)
        with open(snap / "network_split.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["u", "v", "in_partial"])
            for u, v in sorted(d.edges):
                writer.writerow([u, v, int((u, v) in kept)])
    else:
        raise ConfigError(f"unknown modality {modality!r}")
    write_features_csv(table, pairs, snap / f"features_{modality}.csv")
    return table


def load_feature_table(snap_dir, modality: str, pairs) -> FeatureTable:
    path = Path(snap_dir) / f"features_{modality}.csv"
    if not path.exists():
        raise DataError(f"missing {path}; run the features step for modality {modality}")
    return read_features_csv(path, pairs, modality)


def run_attack(snap_dir, modality: str, seed: int, cfg: PipelineConfig | None = None):
    snap = Path(snap_dir)
    _, pairs, stored_cfg = load_snapshot(snap)
    cfg = cfg or stored_cfg
    table = load_feature_table(snap, modality, pairs)
    result = cross_validate(pairs, table, folds=cfg.folds, seed=seed, n_trees=cfg.n_trees)
    path = snap / f"results_attack_{modality}.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment", "modality", "fold", "auc"])
        for i, a in enumerate(result.fold_aucs):
            writer.writerow([f"attack_seed{seed}", modality, i, repr(a)])
        writer.writerow([f"attack_seed{seed}", modality, "mean", repr(result.mean_auc)])
    return result


def _fmt(x: float) -> str:
    return "NA" if np.isnan(x) else repr(float(x))


def run_fusion(snap_dir, subsets, seed: int, cfg: PipelineConfig | None = None):
    """Evaluate fused scores for the given subsets; returns (subset, eval) rows.

    Writes both the per-subset AUC table and a per-pair score export
    (posteriors, weighted and simple-average scores, per-subset scores).
    """
    snap = Path(snap_dir)
    _, pairs, stored_cfg = load_snapshot(snap)
    cfg = cfg or stored_cfg
    tables = {}
    for m in MODALITIES:
        path = snap / f"features_{m}.csv"
        if path.exists():
            tables[m] = read_features_csv(path, pairs, m)
    if not tables:
        raise DataError("no feature tables found; run the features step first")
    for subset in subsets:
        missing = [m for m in subset if m not in tables]
        if missing:
            raise DataError(f"subset {''.join(subset)} needs missing feature tables {missing}")
    evals, scores = evaluate_fusion_subsets(pairs, tables, subsets, folds=cfg.folds,
                                            inner_split=cfg.inner_split,
                                            n_trees=cfg.n_trees, seed=seed)
    rows = [(subset, evals[subset]) for subset in [tuple(s) for s in subsets]]
    path = snap / "results_fusion.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment", "subset", "fold", "fused_auc", "baseline_auc"])
        for subset, ev in rows:
            name = "".join(subset)
            for i, (a, b) in enumerate(zip(ev.fold_aucs, ev.baseline_fold_aucs)):
                writer.writerow([f"fuse_seed{seed}", name, i, repr(a), repr(b)])
            writer.writerow([f"fuse_seed{seed}", name, "mean",
                             repr(ev.mean_auc), repr(ev.baseline_mean_auc)])
    score_path = snap / "scores_fusion.csv"
    subset_names = ["s_" + "".join(s) for s, _ in rows]
    with open(score_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        present = [m for m in MODALITIES if m in tables]
        writer.writerow(["u", "v", "label"] + [f"post_{m}" for m in present]
                        + ["s_M", "s_BL"] + subset_names)
        for i, p in enumerate(pairs):
            row = [p.u, p.v, p.label]
            row += [_fmt(scores.posteriors[m][i]) for m in present]
            row += [_fmt(scores.fused[i]), _fmt(scores.baseline[i])]
            row += [_fmt(scores.subset_scores[s][i]) for s, _ in rows]
            writer.writerow(row)
    return rows


def parse_subset_arg(arg: str):
    """CLI fuse --subset value: letters like HTL, 'all', or 'enumerate'."""
    if arg == "all":
        return [MODALITIES]
    if arg == "enumerate":
        return list(enumerate_subsets())
    letters = tuple(arg.upper())
    bad = [m for m in letters if m not in MODALITIES]
    if bad or not letters or len(set(letters)) != len(letters):
        raise ConfigError(f"invalid modality subset {arg!r}; use letters from {''.join(MODALITIES)}")
    return [tuple(m for m in MODALITIES if m in letters)]


def run_robustness(snap_dir, fractions, seed: int, cfg: PipelineConfig | None = None):
    snap = Path(snap_dir)
    _, pairs, stored_cfg = load_snapshot(snap)
    cfg = cfg or stored_cfg
    raw = load_dataset(snap / "raw_posts.jsonl", snap / "raw_edges.csv",
                       n_categories=cfg.n_categories)
    with open(snap / "meta.json", encoding="utf-8") as fh:
        pair_seed = json.load(fh)["seed"]
    cells = robustness.robustness_sweep(
        raw, fractions, seed=seed, pair_seed=pair_seed,
        n_removal_seeds=cfg.n_removal_seeds, folds=cfg.folds, n_trees=cfg.n_trees,
        inner_split=cfg.inner_split, image_threshold=cfg.image_threshold,
        n_categories=cfg.n_categories,
        filter_kwargs={
            "low_pct": cfg.account_low_pct, "high_pct": cfg.account_high_pct,
            "tag_min": cfg.tag_min_users, "tag_max": cfg.tag_max_users,
            "token_min": cfg.token_min_users, "token_max": cfg.token_max_users,
        },
        pair_kwargs={
            "loc_min_distinct": cfg.loc_min_distinct,
            "loc_min_checkins": cfg.loc_min_checkins,
        },
    )
    path = snap / "results_robustness.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fraction", "attack", "mean_auc", "std_auc", "n_runs"])
        for c in cells:
            mean = "NA" if np.isnan(c.mean_auc) else repr(c.mean_auc)
            std = "NA" if np.isnan(c.std_auc) else repr(c.std_auc)
            writer.writerow([repr(c.fraction), c.attack, mean, std, c.n_runs])
    return cells
