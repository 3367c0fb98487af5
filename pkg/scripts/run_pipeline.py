#!/usr/bin/env python3
"""End-to-end experiment on the default synthetic network.

Generates the dataset, ingests it into a snapshot, computes all five feature
tables, runs every monomodal attack, and fuses them. Results land in the
output directory as CSV.

    python scripts/run_pipeline.py --out runs/default --seed 0
"""

import argparse
import sys
from pathlib import Path

from linkfuse.cli import main as cli


def run(out_dir: str, seed: int, config: str | None) -> int:
    out = Path(out_dir)
    data = out / "data"
    snap = out / "snapshot"
    base = ["--config", config] if config else []
    steps = [
        ["synth", "--out", str(data), "--seed", str(seed)] + base,
        ["ingest", "--posts", str(data / "posts.jsonl"),
         "--edges", str(data / "edges.csv"), "--out", str(snap),
         "--seed", str(seed)] + base,
        ["features", "--snapshot", str(snap), "--modality", "all",
         "--seed", str(seed)] + base,
    ]
    steps += [["attack", "--snapshot", str(snap), "--modality", m,
               "--seed", str(seed)] + base for m in "HTILE"]
    steps += [["fuse", "--snapshot", str(snap), "--subset", "all",
               "--seed", str(seed)] + base]
    for step in steps:
        code = cli(step)
        if code != 0:
            return code
    print(f"done: results under {snap}")
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/default")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", default=None)
    args = parser.parse_args()
    sys.exit(run(args.out, args.seed, args.config))
