"""Task-sequence training: teacher snapshotting, Top-n selection from the
previous task, joint distillation loss, and the optional diagonal-Fisher
quadratic regularizer.

The teacher for task t is the model at the end of task t-1; task 0 trains on
plain cross-entropy. The task loop is strictly sequential and fully
deterministic under a fixed seed and config.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distill import (
    DistillConfig,
    LossReport,
    ce_loss_batch,
    kd_hidden_loss,
    kd_logits_batch,
    total_loss,
)
from .data import TaskDataset
from .metrics import (
    RunResult,
    evaluate,
    final_avg_accuracy,
    jaccard,
    retention_kl,
    subnetwork_cosine,
)
from .metrics import bwt as bwt_metric
from .model import (
    ForwardTrace,
    Gradients,
    LayerSpec,
    SdmlpModel,
    backward,
    forward,
    init_model,
    save_model,
    sgd_step,
)
from .tracking import ActivationStats, TopNSelection, mean_entropy, select_top_n

PROBE_SIZE = 64
COUNT_WINDOWS = ("final_epoch", "cumulative")


@dataclass
class TrainConfig:
    epochs_per_task: int = 200
    lr: float = 0.05
    batch_size: int = 32
    distill: DistillConfig = field(default_factory=DistillConfig)
    distill_enabled: bool = True
    ewc_enabled: bool = False
    ewc_lambda: float = 0.0
    seed: int = 0
    sampling_interval: int = 50
    count_window: str = "final_epoch"
    multi_anchor: bool = False

    def __post_init__(self):
        if self.epochs_per_task < 1 or self.batch_size < 1:
            raise ValueError("epochs_per_task and batch_size must be positive")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.sampling_interval < 1:
            raise ValueError("sampling_interval must be >= 1")
        if self.count_window not in COUNT_WINDOWS:
            raise ValueError(f"count_window must be one of {COUNT_WINDOWS}")
        if self.ewc_enabled and self.ewc_lambda <= 0:
            raise ValueError("ewc_lambda must be positive when EWC is enabled")


@dataclass
class EwcAnchor:
    """Parameter snapshot plus diagonal Fisher importances, one per task."""

    params: list[np.ndarray]  # hidden matrices then output matrix
    fisher: list[np.ndarray]


@dataclass
class ContinualState:
    student: SdmlpModel
    teacher: SdmlpModel | None = None
    prev_selection: TopNSelection | None = None
    task_index: int = 0
    ewc_anchors: list[EwcAnchor] = field(default_factory=list)


@dataclass
class TaskLogs:
    """Per-task training record consumed by run_sequence."""

    loss_rows: list[tuple[int, int, float, float, float, float]]
    entropy_start: float
    entropy_end: float
    stats: ActivationStats
    sampled_sets: list[tuple[int, list[np.ndarray]]]  # (epoch, ranked top-k per layer)
    kl_points: list[tuple[int, float]]
    cosine: float | None


def _model_params(model: SdmlpModel) -> list[np.ndarray]:
    return list(model.hidden) + [model.output]


def _counting_pass(model: SdmlpModel, x: np.ndarray, batch_size: int) -> ActivationStats:
    stats = ActivationStats.for_model(model)
    for start in range(0, x.shape[0], batch_size):
        stats.record_batch(forward(model, x[start:start + batch_size]))
    return stats


def _probe_topk_sets(model: SdmlpModel, probe: np.ndarray) -> list[np.ndarray]:
    """Per layer, the k most frequently selected neurons over the probe batch,
    ordered by count (rank 0 = most frequent, ties to lower index)."""
    trace = forward(model, probe)
    sets = []
    for active, spec in zip(trace.active, model.specs):
        counts = np.bincount(active.ravel(), minlength=spec.out_dim)
        order = np.argsort(-counts, kind="stable")
        sets.append(order[:spec.k])
    return sets


def ssd_loss_and_grads(
    student: SdmlpModel,
    x: np.ndarray,
    y: np.ndarray,
    dcfg: DistillConfig,
    teacher: SdmlpModel | None = None,
    selection: TopNSelection | None = None,
    student_selection: TopNSelection | None = None,
    forced_active: list[np.ndarray] | None = None,
) -> tuple[LossReport, Gradients, ForwardTrace]:
    """Batch-mean loss report and exact weight gradients of the total loss.

    forced_active freezes the student's Top-K masks (finite-difference
    oracles); the teacher is evaluated as-is since it carries no gradient.
    """
    trace = forward(student, x, forced_active=forced_active)
    ce, dce = ce_loss_batch(trace.logits, y)
    has_teacher = teacher is not None and selection is not None
    if not has_teacher:
        report = total_loss(ce, 0.0, 0.0, dcfg, has_teacher=False)
        grads = backward(student, trace, dce)
        return report, grads, trace
    t_trace = forward(teacher, x)
    kdl, dkdl = kd_logits_batch(
        trace.logits, t_trace.logits, dcfg.temperature, dcfg.kl_direction
    )
    if dcfg.hidden_term_enabled:
        kdh, dkdh = kd_hidden_loss(
            trace, t_trace, selection, dcfg.temperature,
            dcfg.kl_direction, dcfg.hidden_source,
            student_selection=student_selection,
        )
    else:
        kdh, dkdh = 0.0, None
    report = total_loss(ce, kdh, kdl, dcfg, has_teacher=True)
    w_logits = (1.0 - dcfg.alpha) * (1.0 - dcfg.lam)
    w_hidden = (1.0 - dcfg.alpha) * dcfg.lam
    dlogits = dcfg.alpha * dce + w_logits * dkdl
    hidden_pre = hidden_post = None
    if dkdh is not None and w_hidden != 0.0:
        weighted = [w_hidden * g for g in dkdh]
        if dcfg.hidden_source == "pre_mask":
            hidden_pre = weighted
        else:
            hidden_post = weighted
    grads = backward(student, trace, dlogits, hidden_pre, hidden_post)
    return report, grads, trace


def estimate_fisher(model: SdmlpModel, x: np.ndarray, batch_size: int = 32) -> list[np.ndarray]:
    """Diagonal Fisher: mean over samples of the squared cross-entropy weight
    gradients, expectation taken under the model's own predicted distribution."""
    x = np.atleast_2d(x)
    if x.shape[0] == 0:
        raise ValueError("cannot estimate Fisher on an empty dataset")
    fisher = [np.zeros_like(p) for p in _model_params(model)]
    n = x.shape[0]
    for i in range(n):
        trace = forward(model, x[i:i + 1])
        logits = trace.logits[0]
        z = logits - logits.max()
        p = np.exp(z)
        p /= p.sum()
        for label in range(model.class_count):
            if p[label] < 1e-12:
                continue
            dlogits = p.copy()
            dlogits[label] -= 1.0
            g = backward(model, trace, dlogits[None, :])
            for acc, grad in zip(fisher, _model_params_of(g)):
                acc += p[label] * grad ** 2
    return [f / n for f in fisher]


def _model_params_of(grads: Gradients) -> list[np.ndarray]:
    return list(grads.hidden) + [grads.output]


def ewc_penalty(
    model: SdmlpModel, anchors: list[EwcAnchor], ewc_lambda: float
) -> tuple[float, Gradients]:
    """(lambda/2) * sum F (theta - theta*)^2 summed over anchors, plus grad."""
    if not anchors:
        raise ValueError("no EWC anchors present")
    params = _model_params(model)
    grads = [np.zeros_like(p) for p in params]
    penalty = 0.0
    for anchor in anchors:
        if len(anchor.params) != len(params):
            raise ValueError("anchor/model parameter count mismatch")
        for i, (p, p0, f) in enumerate(zip(params, anchor.params, anchor.fisher)):
            if p.shape != p0.shape:
                raise ValueError("anchor/model shape mismatch")
            diff = p - p0
            penalty += 0.5 * ewc_lambda * float(np.sum(f * diff ** 2))
            grads[i] += ewc_lambda * f * diff
    return penalty, Gradients(hidden=grads[:-1], output=grads[-1])


def run_task(
    state: ContinualState,
    dataset: TaskDataset,
    config: TrainConfig,
) -> tuple[ContinualState, TaskLogs]:
    """Train the student on one task and advance the continual state.

    A fixed probe batch from the current task feeds the sampled traces:
    Top-k index sets (Jaccard/heatmap) and retention KL against the frozen
    teacher. The student starts each task as an exact copy of the teacher,
    so the KL trace ramps up from zero as the new task pulls the logits away
    and settles where the cross-entropy and distillation pressures balance.
    """
    if dataset.train_x.shape[0] == 0:
        raise ValueError("empty task dataset")
    rng = np.random.default_rng([config.seed, state.task_index])
    student = state.student
    dcfg = config.distill
    teacher = state.teacher if config.distill_enabled else None
    selection = state.prev_selection if config.distill_enabled else None
    has_teacher = teacher is not None and selection is not None

    x, y = dataset.train_x, dataset.train_y
    n_train = x.shape[0]
    probe = x[:min(PROBE_SIZE, n_train)]
    teacher_probe_logits = forward(teacher, probe).logits if has_teacher else None

    cumulative = ActivationStats.for_model(student) if config.count_window == "cumulative" else None
    loss_rows = []
    sampled_sets: list[tuple[int, list[np.ndarray]]] = []
    kl_points: list[tuple[int, float]] = []
    entropy_start = None

    def is_sampling_epoch(epoch):
        return epoch % config.sampling_interval == 0 or epoch == config.epochs_per_task

    for epoch in range(1, config.epochs_per_task + 1):
        perm = rng.permutation(n_train)
        sums = np.zeros(4)
        for start in range(0, n_train, config.batch_size):
            idx = perm[start:start + config.batch_size]
            report, grads, trace = ssd_loss_and_grads(
                student, x[idx], y[idx], dcfg,
                teacher=teacher, selection=selection,
            )
            if config.ewc_enabled and state.ewc_anchors:
                _, egrads = ewc_penalty(student, state.ewc_anchors, config.ewc_lambda)
                for g, eg in zip(grads.hidden, egrads.hidden):
                    g += eg
                grads.output += egrads.output
            student = sgd_step(student, grads, config.lr, rng)
            if cumulative is not None:
                cumulative.record_batch(trace)
            sums += idx.size * np.array(
                [report.ce, report.kd_hidden, report.kd_logits, report.total]
            )
        ce_m, kdh_m, kdl_m, tot_m = sums / n_train
        loss_rows.append((state.task_index, epoch, ce_m, kdh_m, kdl_m, tot_m))
        if epoch == 1:
            entropy_start = mean_entropy(_counting_pass(student, x, config.batch_size))
        if is_sampling_epoch(epoch):
            sampled_sets.append((epoch, _probe_topk_sets(student, probe)))
            if teacher_probe_logits is not None:
                s_logits = forward(student, probe).logits
                kl_points.append((
                    epoch,
                    retention_kl(s_logits, teacher_probe_logits, dcfg.temperature),
                ))

    # Activation statistics feeding Top-n selection: one fresh pass over the
    # task's data at the end of training, or the cumulative counters.
    stats = cumulative if cumulative is not None else _counting_pass(student, x, config.batch_size)
    entropy_end = mean_entropy(_counting_pass(student, x, config.batch_size))

    r_min = min(s.out_dim for s in student.specs)
    k_max = max(s.k for s in student.specs)
    n_eff = min(max(dcfg.n, k_max), r_min)
    next_selection = select_top_n(stats, n_eff)

    cosine = None
    if has_teacher:
        cosine = subnetwork_cosine(teacher, student, selection)

    anchors = list(state.ewc_anchors)
    if config.ewc_enabled:
        anchor = EwcAnchor(
            params=[p.copy() for p in _model_params(student)],
            fisher=estimate_fisher(student, x, config.batch_size),
        )
        anchors = anchors + [anchor] if config.multi_anchor else [anchor]

    new_state = ContinualState(
        student=student,
        teacher=student.snapshot(),
        prev_selection=next_selection,
        task_index=state.task_index + 1,
        ewc_anchors=anchors,
    )
    logs = TaskLogs(
        loss_rows=loss_rows,
        entropy_start=entropy_start,
        entropy_end=entropy_end,
        stats=stats,
        sampled_sets=sampled_sets,
        kl_points=kl_points,
        cosine=cosine,
    )
    return new_state, logs


def run_sequence(
    task_datasets: list[TaskDataset],
    config: TrainConfig,
    specs: list[LayerSpec],
    class_count: int,
    constrain_output: bool = True,
    checkpoint_dir=None,
) -> RunResult:
    """Run the full task sequence and assemble the run-level result."""
    if not task_datasets:
        raise ValueError("at least one task is required")
    all_sets = [d.class_set for d in task_datasets]
    for i, a in enumerate(all_sets):
        for b in all_sets[i + 1:]:
            if a & b:
                raise ValueError(f"task class sets overlap: {sorted(a & b)}")

    model = init_model(specs, class_count, config.seed, constrain_output)
    state = ContinualState(student=model)
    t_count = len(task_datasets)
    r_matrix = np.full((t_count, t_count), np.nan)
    result = RunResult(
        accuracy_matrix=r_matrix, mean_bwt=None, final_avg_accuracy=0.0
    )
    seen: set[int] = set()
    prev_epoch_set = None  # (global_epoch, per-layer sets) for the Jaccard trace
    for t, dataset in enumerate(task_datasets):
        state, logs = run_task(state, dataset, config)
        seen |= {int(c) for c in dataset.class_set}
        offset = t * config.epochs_per_task

        result.loss_rows.extend(logs.loss_rows)
        result.entropy_summary.append((t, logs.entropy_start, logs.entropy_end))
        result.activation_stats.append(logs.stats)
        result.kl_trace.extend((t, epoch, v) for epoch, v in logs.kl_points)
        if logs.cosine is not None:
            result.cosine_trace.append((t, logs.cosine))
        for epoch, sets in logs.sampled_sets:
            for layer, ranked in enumerate(sets):
                for rank, neuron in enumerate(ranked):
                    result.heatmap_log.append((offset + epoch, layer, rank, int(neuron)))
            if prev_epoch_set is not None:
                vals = [
                    jaccard(a, b) for a, b in zip(prev_epoch_set[1], sets)
                ]
                result.jaccard_trace.append((t, epoch, float(np.mean(vals))))
            prev_epoch_set = (offset + epoch, sets)

        for i in range(t + 1):
            r_matrix[t, i] = evaluate(
                state.student,
                task_datasets[i].val_x,
                task_datasets[i].val_y,
                allowed_classes=sorted(seen),
            )
        if checkpoint_dir is not None:
            save_model(state.student, f"{checkpoint_dir}/model_task{t}.npz")

    result.final_avg_accuracy = final_avg_accuracy(r_matrix)
    result.mean_bwt = bwt_metric(r_matrix) if t_count >= 2 else None
    return result
