"""Evaluation quantities: accuracy matrix, backward transfer, subnetwork
similarity traces, retention KL, and the CSV contract consumed by the plots
component.

Sign convention for backward transfer: the formula averages R[T,i] - R[i,i]
over earlier tasks, so less negative means less forgetting.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .model import SdmlpModel, forward
from .numerics import cosine_sim, kl_div, softmax_temp_rows
from .tracking import ActivationStats, TopNSelection

# Fixed column orders of the run output contract.
ACCURACY_COLUMNS = ["t", "i", "acc"]
TRACE_COLUMNS = ["metric", "task", "epoch", "value"]
ENTROPY_COLUMNS = ["task", "layer", "neuron", "count", "freq", "entropy"]
HEATMAP_COLUMNS = ["epoch", "layer", "rank", "neuron_index"]


@dataclass
class RunResult:
    """Everything a single continual-learning run produced."""

    accuracy_matrix: np.ndarray  # T x T, NaN above the diagonal
    mean_bwt: float | None
    final_avg_accuracy: float
    jaccard_trace: list[tuple[int, int, float]] = field(default_factory=list)
    kl_trace: list[tuple[int, int, float]] = field(default_factory=list)
    cosine_trace: list[tuple[int, float]] = field(default_factory=list)
    loss_rows: list[tuple[int, int, float, float, float, float]] = field(default_factory=list)
    entropy_summary: list[tuple[int, float, float]] = field(default_factory=list)
    heatmap_log: list[tuple[int, int, int, int]] = field(default_factory=list)
    activation_stats: list[ActivationStats] = field(default_factory=list)


def evaluate(model: SdmlpModel, x: np.ndarray, y: np.ndarray,
             allowed_classes=None) -> float:
    """Fraction of samples whose argmax logit matches the label.

    allowed_classes restricts the argmax to the classes seen so far
    (class-incremental evaluation); ties go to the lowest index either way.
    """
    x = np.atleast_2d(x)
    y = np.asarray(y)
    if x.shape[0] == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    logits = forward(model, x).logits
    if allowed_classes is not None:
        allowed = np.sort(np.asarray(list(allowed_classes)))
        pred = allowed[np.argmax(logits[:, allowed], axis=1)]
    else:
        pred = np.argmax(logits, axis=1)
    return float(np.mean(pred == y))


def bwt(r_matrix: np.ndarray) -> float:
    """Backward transfer: mean over i < T of R[T,i] - R[i,i]."""
    r = np.asarray(r_matrix, dtype=np.float64)
    t = r.shape[0]
    if t < 2:
        raise ValueError("backward transfer is undefined for fewer than 2 tasks")
    diffs = [r[t - 1, i] - r[i, i] for i in range(t - 1)]
    return float(np.mean(diffs))


def jaccard(s_prev, s_cur) -> float:
    """|intersection| / |union| of two index sets."""
    a = set(np.asarray(list(s_prev)).tolist())
    b = set(np.asarray(list(s_cur)).tolist())
    if not a and not b:
        raise ValueError("jaccard is undefined for two empty sets")
    return len(a & b) / len(a | b)


def subnetwork_cosine(
    teacher: SdmlpModel, student: SdmlpModel, selection: TopNSelection
) -> float:
    """Cosine similarity of the selected neurons' weight rows, flattened."""
    if len(teacher.hidden) != len(student.hidden):
        raise ValueError("teacher/student layer count mismatch")
    t_parts, s_parts = [], []
    for tw, sw, idx in zip(teacher.hidden, student.hidden, selection.layers):
        if tw.shape != sw.shape:
            raise ValueError("teacher/student weight shape mismatch")
        t_parts.append(tw[idx].ravel())
        s_parts.append(sw[idx].ravel())
    return cosine_sim(np.concatenate(t_parts), np.concatenate(s_parts))


def retention_kl(
    student_logits: np.ndarray, teacher_logits: np.ndarray, temperature: float
) -> float:
    """Batch-mean KL(teacher || student) of the temperature softmaxes.

    The teacher distribution is the reference (first argument), independent of
    the training-loss KL direction.
    """
    student_logits = np.atleast_2d(student_logits)
    teacher_logits = np.atleast_2d(teacher_logits)
    if student_logits.shape != teacher_logits.shape:
        raise ValueError("student/teacher batch shape mismatch")
    p = softmax_temp_rows(teacher_logits, temperature)
    q = softmax_temp_rows(student_logits, temperature)
    return float(np.mean([kl_div(p[i], q[i]) for i in range(p.shape[0])]))


def final_avg_accuracy(r_matrix: np.ndarray) -> float:
    """Mean accuracy over all tasks after the final task."""
    r = np.asarray(r_matrix, dtype=np.float64)
    return float(np.mean(r[-1, :]))


def write_accuracy_matrix(result: RunResult, path) -> None:
    r = result.accuracy_matrix
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(ACCURACY_COLUMNS)
        for t in range(r.shape[0]):
            for i in range(t + 1):
                w.writerow([t, i, repr(float(r[t, i]))])


def write_traces(result: RunResult, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRACE_COLUMNS)
        for task, epoch, ce, kdh, kdl, total in result.loss_rows:
            w.writerow(["loss_ce", task, epoch, repr(float(ce))])
            w.writerow(["loss_kd_hidden", task, epoch, repr(float(kdh))])
            w.writerow(["loss_kd_logits", task, epoch, repr(float(kdl))])
            w.writerow(["loss_total", task, epoch, repr(float(total))])
        for task, epoch, value in result.jaccard_trace:
            w.writerow(["jaccard", task, epoch, repr(float(value))])
        for task, epoch, value in result.kl_trace:
            w.writerow(["retention_kl", task, epoch, repr(float(value))])
        for task, value in result.cosine_trace:
            w.writerow(["cosine", task, -1, repr(float(value))])


def write_entropy(result: RunResult, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(ENTROPY_COLUMNS)
        for task, stats in enumerate(result.activation_stats):
            freqs = stats.frequencies()
            ents = stats.entropies()
            for layer, (counts, p, h) in enumerate(zip(stats.counts, freqs, ents)):
                for neuron in range(counts.size):
                    w.writerow([
                        task, layer, neuron, int(counts[neuron]),
                        repr(float(p[neuron])), repr(float(h[neuron])),
                    ])


def write_heatmap(result: RunResult, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(HEATMAP_COLUMNS)
        for epoch, layer, rank, neuron_index in result.heatmap_log:
            w.writerow([epoch, layer, rank, neuron_index])


def write_run_csvs(result: RunResult, outdir) -> None:
    """Write the four CSV contract files into outdir."""
    write_accuracy_matrix(result, f"{outdir}/accuracy_matrix.csv")
    write_traces(result, f"{outdir}/traces.csv")
    write_entropy(result, f"{outdir}/entropy.csv")
    write_heatmap(result, f"{outdir}/heatmap.csv")
