"""CSV contract loading with loud, named failures.

Each loader validates the header before reading any rows, so a malformed
directory fails with the missing file or column spelled out instead of a
partial figure.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

FIGURE_KINDS = (
    "heatmap",
    "topn_curve",
    "alpha_T_surface",
    "trace_panel",
    "accuracy_curves",
)


class PlotContractError(ValueError):
    """The input directory does not satisfy the CSV contract."""


class MissingContractFileError(PlotContractError):
    pass


class MissingColumnError(PlotContractError):
    pass


@dataclass(frozen=True)
class PlotJob:
    """One rendering job: an input directory, a figure kind, an output path."""

    input_dir: str
    kind: str
    output_path: str

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise PlotContractError(
                f"unknown figure kind {self.kind!r}; known: {', '.join(FIGURE_KINDS)}"
            )


def read_rows(path: str, required: list[str]) -> list[dict]:
    """Load a CSV, insisting that the file and the required columns exist."""
    if not os.path.exists(path):
        raise MissingContractFileError(f"missing contract file: {path}")
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise MissingColumnError(
                f"{path}: missing column(s) {', '.join(missing)}; header is {header}"
            )
        rows = list(reader)
    if not rows:
        raise PlotContractError(f"{path}: no data rows")
    return rows


def load_heatmap(input_dir: str) -> list[dict]:
    rows = read_rows(
        os.path.join(input_dir, "heatmap.csv"),
        ["epoch", "layer", "rank", "neuron_index"],
    )
    return [
        {
            "epoch": int(r["epoch"]),
            "layer": int(r["layer"]),
            "rank": int(r["rank"]),
            "neuron_index": int(r["neuron_index"]),
        }
        for r in rows
    ]


def load_traces(input_dir: str) -> list[dict]:
    rows = read_rows(
        os.path.join(input_dir, "traces.csv"),
        ["metric", "task", "epoch", "value"],
    )
    return [
        {
            "metric": r["metric"],
            "task": int(r["task"]),
            "epoch": int(r["epoch"]),
            "value": float(r["value"]),
        }
        for r in rows
    ]


def load_accuracy_matrix(input_dir: str) -> list[dict]:
    rows = read_rows(
        os.path.join(input_dir, "accuracy_matrix.csv"), ["t", "i", "acc"]
    )
    return [
        {"t": int(r["t"]), "i": int(r["i"]), "acc": float(r["acc"])}
        for r in rows
    ]


def load_sweep(input_dir: str, required_params: list[str]) -> list[dict]:
    rows = read_rows(
        os.path.join(input_dir, "sweep.csv"),
        required_params + ["final_accuracy_mean", "final_accuracy_std"],
    )
    out = []
    for r in rows:
        entry = {p: float(r[p]) for p in required_params}
        entry["final_accuracy_mean"] = float(r["final_accuracy_mean"])
        entry["final_accuracy_std"] = float(r["final_accuracy_std"])
        out.append(entry)
    return out
