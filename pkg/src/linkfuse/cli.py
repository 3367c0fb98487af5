"""Command-line entry point for the attack pipeline.

Subcommands compose into the usual experiment chain:

    linkfuse synth --out data/
    linkfuse ingest --posts data/posts.jsonl --edges data/edges.csv --out snap/
    linkfuse features --snapshot snap/ --modality all
    linkfuse attack --snapshot snap/ --modality H
    linkfuse fuse --snapshot snap/ --subset all
    linkfuse robustness --snapshot snap/ --steps 10,20,30,40,50

Every subcommand takes --seed; identical invocations write byte-identical
artifacts. Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .dataset import MODALITIES
from .errors import ConfigError, DataError
from .pipeline import (compute_features, ingest, load_config, parse_subset_arg,
                       run_attack, run_fusion, run_robustness)
from .synth import generate, write_dataset_files, write_manifest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linkfuse",
                                     description="Friendship inference from multimodal posts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", help="INI config file (a [synth] section overrides defaults)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")

    p = sub.add_parser("ingest", help="load, filter and sample pairs into a snapshot")
    p.add_argument("--posts", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--out", required=True, help="snapshot directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")

    p = sub.add_parser("features", help="compute and persist feature tables")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--modality", required=True, choices=list(MODALITIES) + ["all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")

    p = sub.add_parser("attack", help="cross-validated monomodal attack")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--modality", required=True, choices=list(MODALITIES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")

    p = sub.add_parser("fuse", help="fused / subset / baseline attack")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--subset", default="all",
                   help="modality letters (e.g. HTL), 'all', or 'enumerate'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")

    p = sub.add_parser("robustness", help="post-removal sweep")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--steps", default="10,20,30,40,50",
                   help="removal percentages, comma separated")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    return parser


def _cmd_synth(args) -> int:
    _, synth_cfg = load_config(args.config)
    if args.seed is not None:
        synth_cfg = replace(synth_cfg, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    d, _ = generate(synth_cfg)
    write_dataset_files(d, out / "posts.jsonl", out / "edges.csv")
    write_manifest(synth_cfg, d, out / "manifest.json")
    print(f"synth: {d.n_users} users, {len(d.posts)} posts, {len(d.edges)} edges -> {out}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    cfg, _ = load_config(args.config)
    counts = ingest(args.posts, args.edges, args.out, args.seed, cfg)
    print(f"snapshot {args.out}: {counts['users']} users, {counts['posts']} posts, "
          f"{counts['edges']} edges, {counts['friend_pairs']} friend pairs, "
          f"{counts['stranger_pairs']} stranger pairs")
    print(f"{'component':<10}{'users':>8}{'items':>10}{'friend pairs':>14}")
    for m in MODALITIES:
        row = counts["modalities"][m]
        print(f"{m:<10}{row['users']:>8}{row['items']:>10}{row['friend_pairs']:>14}")
    return EXIT_OK


def _cmd_features(args) -> int:
    cfg, _ = load_config(args.config)
    cfg = None if args.config is None else cfg
    modalities = list(MODALITIES) if args.modality == "all" else [args.modality]
    for m in modalities:
        table = compute_features(args.snapshot, m, args.seed, cfg)
        print(f"features {m}: {int(table.available.sum())} pairs x {table.dim} dims")
    return EXIT_OK


def _cmd_attack(args) -> int:
    cfg, _ = load_config(args.config)
    cfg = None if args.config is None else cfg
    result = run_attack(args.snapshot, args.modality, args.seed, cfg)
    print(f"attack {args.modality}: mean AUC {result.mean_auc:.4f} "
          f"+/- {result.std_auc:.4f} over {len(result.fold_aucs)} folds")
    return EXIT_OK


def _cmd_fuse(args) -> int:
    cfg, _ = load_config(args.config)
    cfg = None if args.config is None else cfg
    subsets = parse_subset_arg(args.subset)
    rows = run_fusion(args.snapshot, subsets, args.seed, cfg)
    for subset, ev in rows:
        print(f"fuse {''.join(subset):<6} AUC {ev.mean_auc:.4f} "
              f"(baseline {ev.baseline_mean_auc:.4f}, {ev.unscorable} unscorable)")
    return EXIT_OK


def _cmd_robustness(args) -> int:
    cfg, _ = load_config(args.config)
    cfg = None if args.config is None else cfg
    try:
        steps = [int(s) for s in args.steps.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"invalid --steps {args.steps!r}") from exc
    fractions = [s / 100.0 for s in steps]
    cells = run_robustness(args.snapshot, fractions, args.seed, cfg)
    for c in cells:
        mean = "NA" if c.mean_auc != c.mean_auc else f"{c.mean_auc:.4f}"
        print(f"robustness {int(c.fraction * 100):>3}% {c.attack:<11} AUC {mean}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "features": _cmd_features,
    "attack": _cmd_attack,
    "fuse": _cmd_fuse,
    "robustness": _cmd_robustness,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
