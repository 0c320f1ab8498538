"""Selective distillation losses and their exact student-side gradients.

Three ingredients: cross-entropy on the current task, temperature-scaled KL
on the output logits, and temperature-scaled KL on the hidden activations
gathered at the Top-n distillation set. The composite is

    total = alpha * ce + (1 - alpha) * (lam * kd_hidden + (1 - lam) * kd_logits)

except on the very first task, where there is no teacher and total is plain
cross-entropy (no alpha scaling, which would just shrink the learning rate).

The KL argument order is configurable: "student_first" puts the student
distribution first, "teacher_first" is the conventional distillation order.
The teacher side never receives gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ForwardTrace
from .numerics import KL_EPS, kl_div, softmax_temp
from .tracking import TopNSelection

KL_DIRECTIONS = ("student_first", "teacher_first")
HIDDEN_SOURCES = ("pre_mask", "post_mask")


@dataclass
class DistillConfig:
    alpha: float = 0.7
    lam: float = 0.1
    temperature: float = 8.0
    n: int = 1000
    kl_direction: str = "student_first"
    hidden_source: str = "pre_mask"
    # Use the teacher's Top-n set for both models (neuron identity is
    # positional); independent student-side selection exists for ablation.
    shared_selection: bool = True
    hidden_term_enabled: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.kl_direction not in KL_DIRECTIONS:
            raise ValueError(f"kl_direction must be one of {KL_DIRECTIONS}")
        if self.hidden_source not in HIDDEN_SOURCES:
            raise ValueError(f"hidden_source must be one of {HIDDEN_SOURCES}")


@dataclass
class LossReport:
    """Loss components plus their exact weighted composition."""

    ce: float
    kd_hidden: float
    kd_logits: float
    kd: float
    total: float


def ce_loss(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Cross-entropy -log softmax(logits)[label] and its logits gradient."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.size:
        raise ValueError(f"label {label} out of range for {logits.size} classes")
    p = softmax_temp(logits, 1.0)
    loss = -np.log(max(p[label], KL_EPS))
    grad = p.copy()
    grad[label] -= 1.0
    return float(loss), grad


def ce_loss_batch(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over a batch; gradient is of the mean."""
    logits = np.atleast_2d(logits)
    labels = np.asarray(labels)
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    b = logits.shape[0]
    rows = np.arange(b)
    loss = float(np.mean(-np.log(np.maximum(p[rows, labels], KL_EPS))))
    grad = p.copy()
    grad[rows, labels] -= 1.0
    return loss, grad / b


def _soft_kl_grad(
    student: np.ndarray, teacher: np.ndarray, temperature: float, direction: str
) -> tuple[float, np.ndarray]:
    """T^2-scaled KL between temperature softmaxes, grad w.r.t. student raw values."""
    t = temperature
    p = softmax_temp(student, t)
    q = softmax_temp(teacher, t)
    if direction == "student_first":
        loss = t * t * kl_div(p, q)
        g = np.log(p / np.maximum(q, KL_EPS))
        grad = t * p * (g - np.dot(p, g))
    elif direction == "teacher_first":
        loss = t * t * kl_div(q, p)
        grad = t * (p - q)
    else:
        raise ValueError(f"unknown kl_direction {direction!r}")
    return float(loss), grad


def kd_logits_loss(
    student_logits: np.ndarray,
    teacher_logits: np.ndarray,
    temperature: float,
    kl_direction: str = "student_first",
) -> tuple[float, np.ndarray]:
    """Logit distillation for one sample: T^2 * KL of the softened softmaxes."""
    student_logits = np.asarray(student_logits, dtype=np.float64)
    teacher_logits = np.asarray(teacher_logits, dtype=np.float64)
    if student_logits.shape != teacher_logits.shape:
        raise ValueError("student/teacher logit length mismatch")
    return _soft_kl_grad(student_logits, teacher_logits, temperature, kl_direction)


def kd_logits_batch(
    student_logits: np.ndarray,
    teacher_logits: np.ndarray,
    temperature: float,
    kl_direction: str = "student_first",
) -> tuple[float, np.ndarray]:
    """Batch mean of kd_logits_loss; gradient is of the mean."""
    student_logits = np.atleast_2d(student_logits)
    teacher_logits = np.atleast_2d(teacher_logits)
    if student_logits.shape != teacher_logits.shape:
        raise ValueError("student/teacher logit batch shape mismatch")
    b = student_logits.shape[0]
    total = 0.0
    grads = np.zeros_like(student_logits)
    for i in range(b):
        loss, g = _soft_kl_grad(
            student_logits[i], teacher_logits[i], temperature, kl_direction
        )
        total += loss
        grads[i] = g
    return total / b, grads / b


def kd_hidden_loss(
    student_trace: ForwardTrace,
    teacher_trace: ForwardTrace,
    selection: TopNSelection,
    temperature: float,
    kl_direction: str = "student_first",
    hidden_source: str = "pre_mask",
    student_selection: TopNSelection | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Selective hidden-activation distillation over the Top-n set.

    Per hidden layer and sample, gather the n activations at the selection's
    indices from student and teacher, soften each gathered vector with a
    temperature softmax, and take the T^2-scaled KL. The scalar is the mean
    over layers and batch; returned gradients (one (B, r) array per layer,
    w.r.t. the chosen hidden source) are of that mean, nonzero only at the
    gathered entries.

    By default the teacher's index set is applied to both models (neuron
    identity is positional); student_selection switches the student side to
    its own index set for the independent-selection ablation.
    """
    if hidden_source not in HIDDEN_SOURCES:
        raise ValueError(f"hidden_source must be one of {HIDDEN_SOURCES}")
    s_layers = student_trace.pre if hidden_source == "pre_mask" else student_trace.post
    t_layers = teacher_trace.pre if hidden_source == "pre_mask" else teacher_trace.post
    s_sel = student_selection if student_selection is not None else selection
    if len(s_layers) != len(t_layers) or len(s_layers) != len(selection.layers):
        raise ValueError("trace/selection layer count mismatch")
    num_layers = len(s_layers)
    b = student_trace.batch_size
    total = 0.0
    grads = []
    for s_act, t_act, t_idx, s_idx in zip(
        s_layers, t_layers, selection.layers, s_sel.layers
    ):
        if s_act.shape != t_act.shape:
            raise ValueError("student/teacher hidden shape mismatch")
        if max(t_idx.max(initial=-1), s_idx.max(initial=-1)) >= s_act.shape[1]:
            raise ValueError("selection index out of range")
        if s_idx.size != t_idx.size:
            raise ValueError("student/teacher selection size mismatch")
        g_layer = np.zeros_like(s_act)
        for i in range(b):
            loss, g = _soft_kl_grad(
                s_act[i, s_idx], t_act[i, t_idx], temperature, kl_direction
            )
            total += loss
            g_layer[i, s_idx] = g
        grads.append(g_layer / (b * num_layers))
    return total / (b * num_layers), grads


def total_loss(
    ce: float,
    kd_hidden: float,
    kd_logits: float,
    config: DistillConfig,
    has_teacher: bool = True,
) -> LossReport:
    """Weighted composition of the loss family.

    Without a teacher (first task) the KD terms are defined as zero and the
    total is plain cross-entropy.
    """
    if not has_teacher:
        return LossReport(ce=ce, kd_hidden=0.0, kd_logits=0.0, kd=0.0, total=ce)
    kd = config.lam * kd_hidden + (1.0 - config.lam) * kd_logits
    total = config.alpha * ce + (1.0 - config.alpha) * kd
    return LossReport(ce=ce, kd_hidden=kd_hidden, kd_logits=kd_logits, kd=kd, total=total)
