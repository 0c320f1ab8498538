"""Experiment runner: single runs, parameter sweeps, and post-hoc analysis.

Each seed is an independent full run writing its own contract files into
``<out>/seed_<s>/``; the first seed's CSVs are mirrored at the top level next
to the aggregated ``summary.json``. Progress goes to stderr, machine-readable
output only to files.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import os
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import data as data_mod
from . import metrics as metrics_mod
from .config import (
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    load_config,
)
from .continual import run_sequence
from .model import LayerSpec

OUT_ROOT_ENV = "SPARSECL_OUT_ROOT"
CONTRACT_CSVS = ["accuracy_matrix.csv", "traces.csv", "entropy.csv", "heatmap.csv"]

# Sweepable parameter name -> key path into the raw config dict.
SWEEPABLE = {
    "alpha": ("train", "distill", "alpha"),
    "lambda": ("train", "distill", "lam"),
    "T": ("train", "distill", "temperature"),
    "n": ("train", "distill", "n"),
    "k": ("model", "k"),
    "lr": ("train", "lr"),
    "epochs": ("train", "epochs_per_task"),
    "batch_size": ("train", "batch_size"),
    "ewc_lambda": ("train", "ewc_lambda"),
}


class AnalyzeError(RuntimeError):
    pass


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _resolve_out(out: str) -> str:
    root = os.environ.get(OUT_ROOT_ENV)
    if root and not os.path.isabs(out):
        return os.path.join(root, out)
    return out


def build_task_datasets(cfg: ExperimentConfig):
    """Materialize the task list plus (input_dim, class_count)."""
    d = cfg.data
    if d.source == "synthetic":
        s = d.synthetic
        x, y = data_mod.gen_synthetic(
            s.num_classes, s.dim, s.samples_per_class, s.cluster_spread, s.data_seed
        )
        split_seed = s.data_seed
    elif d.source == "embeddings":
        x, y = data_mod.load_embeddings(d.embeddings.path, d.embeddings.format)
        split_seed = 0
    else:
        raise ConfigError(f"data.source must be 'synthetic' or 'embeddings', got {d.source!r}")
    tasks = data_mod.split_tasks(
        x, y, d.num_tasks, d.classes_per_task, d.val_fraction,
        seed=split_seed, shuffle_classes=d.shuffle_classes,
    )
    class_count = int(np.max(y)) + 1
    return tasks, x.shape[1], class_count


def build_specs(cfg: ExperimentConfig, input_dim: int) -> list[LayerSpec]:
    specs = []
    prev = input_dim
    for width in cfg.model.hidden_sizes:
        specs.append(LayerSpec(in_dim=prev, out_dim=width, k=cfg.model.k))
        prev = width
    return specs


def run_one_seed(raw_cfg: dict, seed: int, seed_dir: str) -> dict:
    """Execute one full run; writes contract CSVs and checkpoints to seed_dir."""
    cfg = config_from_dict(raw_cfg)
    os.makedirs(seed_dir, exist_ok=True)
    tasks, input_dim, class_count = build_task_datasets(cfg)
    specs = build_specs(cfg, input_dim)
    train_cfg = cfg.resolved_train(seed)
    result = run_sequence(
        tasks, train_cfg, specs, class_count,
        constrain_output=cfg.model.constrain_output,
        checkpoint_dir=seed_dir,
    )
    metrics_mod.write_run_csvs(result, seed_dir)
    kd_terms = [row[3] for row in result.loss_rows] + [row[4] for row in result.loss_rows]
    return {
        "seed": seed,
        "final_avg_accuracy": result.final_avg_accuracy,
        "mean_bwt": result.mean_bwt,
        "entropy_summary": [
            {"task": t, "mean_entropy_epoch1": start, "mean_entropy_final": end}
            for t, start, end in result.entropy_summary
        ],
        "max_abs_kd_term": max((abs(v) for v in kd_terms), default=0.0),
    }


def _aggregate(per_seed: list[dict]) -> dict:
    accs = [s["final_avg_accuracy"] for s in per_seed]
    bwts = [s["mean_bwt"] for s in per_seed if s["mean_bwt"] is not None]

    def stats(values):
        if not values:
            return {"mean": None, "std": None}
        arr = np.asarray(values, dtype=np.float64)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        return {"mean": float(arr.mean()), "std": std}

    return {"final_accuracy": stats(accs), "bwt": stats(bwts)}


def _write_summary(path, raw_cfg: dict, per_seed: list[dict]) -> dict:
    summary = {
        "config": raw_cfg,
        "per_seed": per_seed,
        "aggregate": _aggregate(per_seed),
    }
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return summary


def execute_run(raw_cfg: dict, out_dir: str, seeds: list[int], jobs: int = 1) -> dict:
    """Run every seed and assemble the output directory contract."""
    os.makedirs(out_dir, exist_ok=True)
    seed_dirs = [os.path.join(out_dir, f"seed_{s}") for s in seeds]
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_seed = list(pool.map(run_one_seed, [raw_cfg] * len(seeds), seeds, seed_dirs))
    else:
        per_seed = []
        for s, d in zip(seeds, seed_dirs):
            _log(f"  seed {s} ...")
            per_seed.append(run_one_seed(raw_cfg, s, d))
    # Mirror the first seed's CSVs at the top level (representative run).
    for name in CONTRACT_CSVS:
        shutil.copyfile(os.path.join(seed_dirs[0], name), os.path.join(out_dir, name))
    return _write_summary(os.path.join(out_dir, "summary.json"), raw_cfg, per_seed)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        _log(f"error: {exc}")
        return 2
    seeds = _parse_seeds(args.seeds) if args.seeds else list(cfg.seeds)
    raw = config_to_dict(cfg)
    raw["seeds"] = seeds
    out_dir = _resolve_out(args.out)
    _log(f"run: {cfg.name} method={cfg.method} seeds={seeds} -> {out_dir}")
    summary = execute_run(raw, out_dir, seeds, args.jobs)
    agg = summary["aggregate"]
    acc = agg["final_accuracy"]
    bwt = agg["bwt"]
    _log(f"final accuracy: {acc['mean']:.4f} +/- {acc['std']:.4f}")
    if bwt["mean"] is not None:
        _log(f"mean BWT: {bwt['mean']:.4f} +/- {bwt['std']:.4f}")
    return 0


def _parse_seeds(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip() != ""]


def _parse_sweep_specs(specs: list[str]) -> list[tuple[str, list]]:
    parsed = []
    for spec in specs:
        if "=" not in spec:
            raise ConfigError(f"sweep spec {spec!r} must look like name=v1,v2,...")
        name, values = spec.split("=", 1)
        name = name.strip()
        if name not in SWEEPABLE:
            raise ConfigError(
                f"unknown sweep parameter {name!r}; sweepable: {', '.join(sorted(SWEEPABLE))}"
            )
        out = []
        for v in values.split(","):
            v = v.strip()
            try:
                out.append(json.loads(v))
            except json.JSONDecodeError:
                raise ConfigError(f"sweep value {v!r} for {name!r} is not a number")
        if not out:
            raise ConfigError(f"sweep parameter {name!r} has no values")
        parsed.append((name, out))
    return parsed


def _set_path(raw: dict, path: tuple[str, ...], value) -> None:
    node = raw
    for key in path[:-1]:
        node = node.setdefault(key, {})
    node[path[-1]] = value


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config)
        grid = _parse_sweep_specs(args.sweep)
    except (ConfigError, OSError) as exc:
        _log(f"error: {exc}")
        return 2
    if not grid:
        _log("error: at least one --sweep name=v1,v2 is required")
        return 2
    seeds = _parse_seeds(args.seeds) if args.seeds else list(cfg.seeds)
    out_dir = _resolve_out(args.out)
    os.makedirs(out_dir, exist_ok=True)
    names = [name for name, _ in grid]
    rows = []
    points = list(itertools.product(*(values for _, values in grid)))
    for idx, point in enumerate(points):
        raw = config_to_dict(cfg)
        raw["seeds"] = seeds
        label_parts = []
        for name, value in zip(names, point):
            _set_path(raw, SWEEPABLE[name], value)
            label_parts.append(f"{name}{value}")
        point_dir = os.path.join(out_dir, f"point_{idx:03d}_{'_'.join(label_parts)}")
        _log(f"sweep point {idx + 1}/{len(points)}: {dict(zip(names, point))}")
        try:
            summary = execute_run(raw, point_dir, seeds, args.jobs)
        except (ConfigError, ValueError) as exc:
            _log(f"error at point {dict(zip(names, point))}: {exc}")
            return 1
        agg = summary["aggregate"]
        rows.append(list(point) + [
            agg["final_accuracy"]["mean"], agg["final_accuracy"]["std"],
            agg["bwt"]["mean"], agg["bwt"]["std"],
        ])
    with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(names + [
            "final_accuracy_mean", "final_accuracy_std", "bwt_mean", "bwt_std",
        ])
        for row in rows:
            w.writerow(row)
    _log(f"sweep complete: {len(rows)} points -> {out_dir}/sweep.csv")
    return 0


def read_accuracy_matrix_csv(path) -> np.ndarray:
    entries = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            entries.append((int(row["t"]), int(row["i"]), float(row["acc"])))
    if not entries:
        raise AnalyzeError(f"{path}: no accuracy entries")
    t_count = max(t for t, _, _ in entries) + 1
    r = np.full((t_count, t_count), np.nan)
    for t, i, acc in entries:
        r[t, i] = acc
    return r


def analyze_run_dir(run_dir: str) -> dict:
    """Recompute headline metrics from the raw CSVs and cross-check summary.json."""
    required = CONTRACT_CSVS + ["summary.json"]
    for name in required:
        if not os.path.exists(os.path.join(run_dir, name)):
            raise AnalyzeError(f"missing contract file: {name}")
    with open(os.path.join(run_dir, "summary.json")) as f:
        summary = json.load(f)
    r = read_accuracy_matrix_csv(os.path.join(run_dir, "accuracy_matrix.csv"))
    recomputed_final = metrics_mod.final_avg_accuracy(r)
    recomputed_bwt = metrics_mod.bwt(r) if r.shape[0] >= 2 else None
    first = summary["per_seed"][0]
    consistent = abs(recomputed_final - first["final_avg_accuracy"]) < 1e-9 and (
        recomputed_bwt is None
        or abs(recomputed_bwt - first["mean_bwt"]) < 1e-9
    )
    trace_stats = {}
    with open(os.path.join(run_dir, "traces.csv"), newline="") as f:
        for row in csv.DictReader(f):
            s = trace_stats.setdefault(
                row["metric"], {"count": 0, "min": np.inf, "max": -np.inf, "last": None}
            )
            v = float(row["value"])
            s["count"] += 1
            s["min"] = min(s["min"], v)
            s["max"] = max(s["max"], v)
            s["last"] = v
    entropy_by_task = {}
    with open(os.path.join(run_dir, "entropy.csv"), newline="") as f:
        for row in csv.DictReader(f):
            entropy_by_task.setdefault(int(row["task"]), []).append(float(row["entropy"]))
    return {
        "recomputed_final_avg_accuracy": recomputed_final,
        "recomputed_mean_bwt": recomputed_bwt,
        "summary_final_avg_accuracy": first["final_avg_accuracy"],
        "summary_mean_bwt": first["mean_bwt"],
        "consistent": bool(consistent),
        "trace_stats": trace_stats,
        "mean_entropy_by_task": {
            str(t): float(np.mean(v)) for t, v in sorted(entropy_by_task.items())
        },
    }


def cmd_analyze(args) -> int:
    try:
        report = analyze_run_dir(args.run_dir)
    except AnalyzeError as exc:
        _log(f"error: {exc}")
        return 1
    out_path = os.path.join(args.run_dir, "analysis.json")
    with open(out_path, "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    _log(f"analysis written to {out_path} (consistent={report['consistent']})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsecl",
        description="Sparse continual-learning experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a config across its seeds")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seeds", default=None, help="comma-separated override")
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid sweep over named parameters")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--seeds", default=None)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument(
        "--sweep", action="append", default=[],
        help="name=v1,v2,... (repeatable; cross-product across parameters)",
    )
    p_sweep.set_defaults(func=cmd_sweep)

    p_an = sub.add_parser("analyze", help="recompute metrics from a run directory")
    p_an.add_argument("run_dir")
    p_an.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
