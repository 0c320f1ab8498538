"""Sparse Top-K MLP with bias-free layers, non-negative L2-normalized weight
rows, straight-through Top-K gradients, and momentum-free projected SGD.

Hidden layers compute z = W @ x on an L2-normalized input, keep the k largest
pre-activations per sample and zero the rest. The output layer is a plain
linear map over all classes (no Top-K, no row normalization). Constraints are
enforced by projection after each SGD step, so gradients are the plain
linear-map gradients with the Top-K selection treated as a fixed mask.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .numerics import l2_normalize_rows, topk_indices_rows

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    """Shape of one hidden layer: in_dim inputs, out_dim neurons, k active."""

    in_dim: int
    out_dim: int
    k: int

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"invalid layer dims {self.in_dim}x{self.out_dim}")
        if not 1 <= self.k <= self.out_dim:
            raise ValueError(f"k={self.k} must be in [1, {self.out_dim}]")


@dataclass
class SdmlpModel:
    """Weight stack: hidden matrices (rows = neurons) plus an output matrix."""

    hidden: list[np.ndarray]
    output: np.ndarray
    specs: list[LayerSpec]
    class_count: int
    constrain_output: bool = True

    @property
    def input_dim(self) -> int:
        return self.specs[0].in_dim

    def snapshot(self) -> "SdmlpModel":
        """Deep, independent copy (teacher freezing)."""
        return SdmlpModel(
            hidden=[w.copy() for w in self.hidden],
            output=self.output.copy(),
            specs=list(self.specs),
            class_count=self.class_count,
            constrain_output=self.constrain_output,
        )


@dataclass
class ForwardTrace:
    """Everything one batch forward produced, stored per sample (row-wise).

    pre[l]    : (B, r_l) pre-activations of hidden layer l
    active[l] : (B, k_l) sorted indices of the Top-K winners
    post[l]   : (B, r_l) pre-activations masked to the winners, zero elsewhere
    logits    : (B, o)
    """

    inputs: np.ndarray
    pre: list[np.ndarray] = field(default_factory=list)
    active: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)
    logits: np.ndarray | None = None

    @property
    def batch_size(self) -> int:
        return self.inputs.shape[0]


@dataclass
class Gradients:
    """Weight gradients, shape-matching the model."""

    hidden: list[np.ndarray]
    output: np.ndarray


def _init_rows(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    """|N(0, 1/in_dim)| rows, L2-renormalized (non-negative by construction)."""
    w = np.abs(rng.normal(0.0, np.sqrt(1.0 / in_dim), size=(out_dim, in_dim)))
    return l2_normalize_rows(w)


def init_model(
    specs: list[LayerSpec],
    class_count: int,
    seed: int,
    constrain_output: bool = True,
) -> SdmlpModel:
    """Deterministic model init: non-negative half-normal rows, unit norm."""
    if not specs:
        raise ValueError("at least one hidden layer spec is required")
    for prev, cur in zip(specs, specs[1:]):
        if prev.out_dim != cur.in_dim:
            raise ValueError(
                f"layer chain mismatch: {prev.out_dim} -> {cur.in_dim}"
            )
    if class_count < 1:
        raise ValueError(f"class_count must be positive, got {class_count}")
    rng = np.random.default_rng(seed)
    hidden = [_init_rows(rng, s.out_dim, s.in_dim) for s in specs]
    out_in = specs[-1].out_dim
    output = np.abs(rng.normal(0.0, np.sqrt(1.0 / out_in), size=(class_count, out_in)))
    return SdmlpModel(hidden, output, list(specs), class_count, constrain_output)


def forward(
    model: SdmlpModel,
    x: np.ndarray,
    forced_active: list[np.ndarray] | None = None,
) -> ForwardTrace:
    """Run a batch (B, d) or single vector (d,) through the network.

    forced_active replaces Top-K selection with the given per-layer index
    arrays; used by the finite-difference oracles to freeze masks.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.input_dim:
        raise ValueError(f"input dim {x.shape[1]} != model dim {model.input_dim}")
    h = l2_normalize_rows(x)
    trace = ForwardTrace(inputs=h)
    for l, (w, spec) in enumerate(zip(model.hidden, model.specs)):
        pre = h @ w.T
        if forced_active is not None:
            active = np.asarray(forced_active[l])
            if active.shape != (x.shape[0], spec.k):
                raise ValueError("forced active set shape mismatch")
        else:
            active = topk_indices_rows(pre, spec.k)
        post = np.zeros_like(pre)
        rows = np.arange(pre.shape[0])[:, None]
        post[rows, active] = pre[rows, active]
        trace.pre.append(pre)
        trace.active.append(active)
        trace.post.append(post)
        h = post
    trace.logits = h @ model.output.T
    return trace


def _masks(trace: ForwardTrace) -> list[np.ndarray]:
    masks = []
    for pre, active in zip(trace.pre, trace.active):
        m = np.zeros_like(pre)
        m[np.arange(pre.shape[0])[:, None], active] = 1.0
        masks.append(m)
    return masks


def backward(
    model: SdmlpModel,
    trace: ForwardTrace,
    dlogits: np.ndarray,
    hidden_pre_grads: list[np.ndarray] | None = None,
    hidden_post_grads: list[np.ndarray] | None = None,
) -> Gradients:
    """Exact gradients with Top-K treated as a fixed mask.

    dlogits holds per-sample loss gradients w.r.t. the logits; the result is
    the gradient of the corresponding batch-summed scalar (scale dlogits by
    1/B for a mean). Extra loss terms acting directly on hidden
    pre-activations (pre-mask) or masked activations (post-mask) are injected
    via hidden_*_grads, one (B, r_l) array per hidden layer.
    """
    dlogits = np.atleast_2d(np.asarray(dlogits, dtype=np.float64))
    if trace.logits is None or dlogits.shape != trace.logits.shape:
        raise ValueError("dlogits shape does not match trace logits")
    if len(trace.pre) != len(model.hidden):
        raise ValueError("trace/model layer count mismatch")
    masks = _masks(trace)
    last_post = trace.post[-1]
    g_out = dlogits.T @ last_post
    dh = dlogits @ model.output  # gradient w.r.t. last post-activation
    g_hidden: list[np.ndarray] = [None] * len(model.hidden)
    for l in range(len(model.hidden) - 1, -1, -1):
        dpost = dh
        if hidden_post_grads is not None and hidden_post_grads[l] is not None:
            dpost = dpost + hidden_post_grads[l]
        dz = dpost * masks[l]
        if hidden_pre_grads is not None and hidden_pre_grads[l] is not None:
            dz = dz + hidden_pre_grads[l]
        upstream = trace.inputs if l == 0 else trace.post[l - 1]
        g_hidden[l] = dz.T @ upstream
        dh = dz @ model.hidden[l]
    return Gradients(hidden=g_hidden, output=g_out)


def project_constraints(
    model: SdmlpModel, rng: np.random.Generator | None = None
) -> SdmlpModel:
    """Clamp hidden weights to >= 0 and renormalize each row to unit norm.

    A row that clamps to all-zero is revived from |N(0, 1/in_dim)| and
    renormalized. The output layer is clamped non-negative (when the model
    carries that constraint) but never row-normalized.
    """
    hidden = []
    for w, spec in zip(model.hidden, model.specs):
        w = np.maximum(w, 0.0)
        norms = np.linalg.norm(w, axis=1)
        dead = np.flatnonzero(norms == 0.0)
        if dead.size:
            if rng is None:
                rng = np.random.default_rng()
            w[dead] = _init_rows(rng, dead.size, spec.in_dim)
        hidden.append(l2_normalize_rows(w))
    output = np.maximum(model.output, 0.0) if model.constrain_output else model.output.copy()
    return SdmlpModel(hidden, output, list(model.specs), model.class_count, model.constrain_output)


def sgd_step(
    model: SdmlpModel,
    grads: Gradients,
    lr: float,
    rng: np.random.Generator | None = None,
) -> SdmlpModel:
    """One momentum-free SGD step followed by constraint projection."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if len(grads.hidden) != len(model.hidden) or grads.output.shape != model.output.shape:
        raise ValueError("gradient shapes do not match model")
    hidden = [w - lr * g for w, g in zip(model.hidden, grads.hidden)]
    output = model.output - lr * grads.output
    stepped = SdmlpModel(hidden, output, list(model.specs), model.class_count, model.constrain_output)
    return project_constraints(stepped, rng)


def save_model(model: SdmlpModel, path) -> None:
    """Self-describing checkpoint; round-trips bit-exactly (float64 npz)."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "specs": [[s.in_dim, s.out_dim, s.k] for s in model.specs],
        "class_count": model.class_count,
        "constrain_output": model.constrain_output,
    }
    arrays = {f"hidden_{i}": w for i, w in enumerate(model.hidden)}
    arrays["output"] = model.output
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_model(path) -> SdmlpModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        specs = [LayerSpec(*row) for row in meta["specs"]]
        hidden = [data[f"hidden_{i}"].astype(np.float64) for i in range(len(specs))]
        output = data["output"].astype(np.float64)
    return SdmlpModel(hidden, output, specs, meta["class_count"], meta["constrain_output"])
