#!/usr/bin/env python3
"""Ablation sweeps over the distillation knobs, via the CLI sweep command.

Produces one sweep directory per knob (alpha, lambda, T, n) under --out, each
with a sweep.csv aggregate. Uses the desk-scale SSD config by default.

Usage:
    python scripts/run_ablations.py --out runs/ablations [--config configs/ssd_desk.json]
"""

import argparse
import os
import sys

from sparsecl.cli import main as cli_main

SWEEPS = {
    "alpha": "alpha=0.1,0.3,0.5,0.7,0.9,1.0",
    "lambda": "lambda=0.1,0.3,0.5,0.7,0.9",
    "T": "T=1,2,4,8,16",
    "n": "n=10,20,50,100,200",
}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default_cfg = os.path.join(os.path.dirname(__file__), "..", "configs", "ssd_desk.json")
    parser.add_argument("--config", default=default_cfg)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--only", choices=sorted(SWEEPS), default=None,
                        help="run a single knob's sweep instead of all four")
    args = parser.parse_args(argv)

    knobs = [args.only] if args.only else sorted(SWEEPS)
    for knob in knobs:
        out_dir = os.path.join(args.out, knob)
        rc = cli_main([
            "sweep", "--config", args.config, "--out", out_dir,
            "--seeds", args.seeds, "--jobs", str(args.jobs),
            "--sweep", SWEEPS[knob],
        ])
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
