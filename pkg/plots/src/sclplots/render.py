"""Figure rendering. Pure pivoting of CSV rows into matplotlib calls.

Every function takes a PlotJob, writes the image at job.output_path, and
returns the Figure so tests can inspect what was drawn.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .contract import (
    PlotContractError,
    PlotJob,
    load_accuracy_matrix,
    load_heatmap,
    load_sweep,
    load_traces,
)

DEFAULT_PANEL_METRICS = ["cosine", "jaccard", "retention_kl"]


def render_heatmap(job: PlotJob):
    """Top-k neuron index membership over sampled epochs, one panel per layer."""
    rows = load_heatmap(job.input_dir)
    layers = sorted({r["layer"] for r in rows})
    fig, axes = plt.subplots(
        len(layers), 1, figsize=(8, 3 * len(layers)), squeeze=False
    )
    for ax, layer in zip(axes[:, 0], layers):
        sub = [r for r in rows if r["layer"] == layer]
        epochs = sorted({r["epoch"] for r in sub})
        neurons = sorted({r["neuron_index"] for r in sub})
        epoch_pos = {e: i for i, e in enumerate(epochs)}
        neuron_pos = {n: i for i, n in enumerate(neurons)}
        grid = np.zeros((len(neurons), len(epochs)))
        for r in sub:
            grid[neuron_pos[r["neuron_index"]], epoch_pos[r["epoch"]]] = 1.0
        ax.imshow(grid, aspect="auto", interpolation="nearest", cmap="Greys")
        ax.set_xticks(range(len(epochs)))
        ax.set_xticklabels(epochs, rotation=45, fontsize=7)
        ax.set_xlabel("epoch")
        ax.set_ylabel("neuron index")
        ax.set_yticks(range(len(neurons)))
        ax.set_yticklabels(neurons, fontsize=6)
        ax.set_title(f"Top-k membership, layer {layer}")
    fig.tight_layout()
    fig.savefig(job.output_path)
    return fig


def render_topn_curve(job: PlotJob):
    """Final accuracy versus the Top-n selection size, from a sweep directory."""
    rows = load_sweep(job.input_dir, ["n"])
    rows.sort(key=lambda r: r["n"])
    n = [r["n"] for r in rows]
    mean = [r["final_accuracy_mean"] for r in rows]
    std = [r["final_accuracy_std"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(n, mean, yerr=std, marker="o", capsize=3)
    ax.set_xlabel("n (distillation set size)")
    ax.set_ylabel("final average accuracy")
    ax.set_title("Accuracy vs Top-n size")
    fig.tight_layout()
    fig.savefig(job.output_path)
    return fig


def render_alpha_t_surface(job: PlotJob):
    """Accuracy surface over the alpha x T sweep grid."""
    rows = load_sweep(job.input_dir, ["alpha", "T"])
    alphas = sorted({r["alpha"] for r in rows})
    temps = sorted({r["T"] for r in rows})
    grid = np.full((len(temps), len(alphas)), np.nan)
    for r in rows:
        grid[temps.index(r["T"]), alphas.index(r["alpha"])] = r["final_accuracy_mean"]
    if np.any(np.isnan(grid)):
        raise PlotContractError(
            "sweep.csv does not cover the full alpha x T grid; refusing to plot partial data"
        )
    fig = plt.figure(figsize=(7, 5))
    ax = fig.add_subplot(projection="3d")
    a_mesh, t_mesh = np.meshgrid(alphas, temps)
    ax.plot_surface(a_mesh, t_mesh, grid, cmap="viridis", edgecolor="k", linewidth=0.3)
    ax.set_xlabel("alpha")
    ax.set_ylabel("T")
    ax.set_zlabel("final average accuracy")
    ax.set_title("Accuracy over distillation weight and temperature")
    fig.savefig(job.output_path)
    return fig


def render_trace_panel(job: PlotJob, metrics: list[str] | None = None):
    """One panel per trace metric, points ordered by task then epoch."""
    metrics = metrics if metrics is not None else DEFAULT_PANEL_METRICS
    rows = load_traces(job.input_dir)
    available = {r["metric"] for r in rows}
    missing = [m for m in metrics if m not in available]
    if missing:
        raise PlotContractError(
            f"traces.csv has no rows for metric(s): {', '.join(missing)}"
        )
    fig, axes = plt.subplots(
        len(metrics), 1, figsize=(7, 2.5 * len(metrics)), squeeze=False
    )
    for ax, metric in zip(axes[:, 0], metrics):
        sub = sorted(
            (r for r in rows if r["metric"] == metric),
            key=lambda r: (r["task"], r["epoch"]),
        )
        ax.plot(range(len(sub)), [r["value"] for r in sub], marker=".")
        boundaries = [i for i in range(1, len(sub)) if sub[i]["task"] != sub[i - 1]["task"]]
        for b in boundaries:
            ax.axvline(b - 0.5, color="gray", linestyle=":", linewidth=0.8)
        ax.set_ylabel(metric)
    axes[-1, 0].set_xlabel("sample index (task order)")
    fig.suptitle("Subnetwork traces")
    fig.tight_layout()
    fig.savefig(job.output_path)
    return fig


def render_accuracy_curves(job: PlotJob):
    """Per-task accuracy after each task boundary, one line per task."""
    rows = load_accuracy_matrix(job.input_dir)
    tasks = sorted({r["i"] for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    for i in tasks:
        pts = sorted((r for r in rows if r["i"] == i), key=lambda r: r["t"])
        ax.plot([r["t"] for r in pts], [r["acc"] for r in pts],
                marker="o", label=f"task {i}")
    ax.set_xlabel("tasks trained")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    ax.set_title("Per-task accuracy over the sequence")
    fig.tight_layout()
    fig.savefig(job.output_path)
    return fig


_RENDERERS = {
    "heatmap": render_heatmap,
    "topn_curve": render_topn_curve,
    "alpha_T_surface": render_alpha_t_surface,
    "trace_panel": render_trace_panel,
    "accuracy_curves": render_accuracy_curves,
}


def render(job: PlotJob):
    """Dispatch a job to its figure renderer; returns the Figure."""
    return _RENDERERS[job.kind](job)
