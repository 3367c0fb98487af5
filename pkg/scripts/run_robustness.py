#!/usr/bin/env python3
"""Post-removal robustness sweep on an existing snapshot.

Expects a snapshot produced by scripts/run_pipeline.py (or the ingest
subcommand); writes results_robustness.csv next to the other results.

    python scripts/run_robustness.py --snapshot runs/default/snapshot
"""

import argparse
import sys

from linkfuse.cli import main as cli

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--snapshot", default="runs/default/snapshot")
    parser.add_argument("--steps", default="10,20,30,40,50")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", default=None)
    args = parser.parse_args()
    cmd = ["robustness", "--snapshot", args.snapshot, "--steps", args.steps,
           "--seed", str(args.seed)]
    if args.config:
        cmd += ["--config", args.config]
    sys.exit(cli(cmd))
