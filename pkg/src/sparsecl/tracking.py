"""Per-neuron Top-K selection statistics across a task.

Counts how often each hidden neuron wins the Top-K race, turns counts into
selection frequencies p_i = a_i / N, scores neurons by binary activation
entropy (base 2, so H is in [0, 1] bits), and picks the Top-n most frequently
selected neurons as the distillation set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ForwardTrace, SdmlpModel


def neuron_entropy(p: float) -> float:
    """Binary entropy of a selection frequency, base 2, with 0*log0 := 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"frequency must be in [0, 1], got {p}")
    return float(binary_entropy(np.asarray([p]))[0])


def binary_entropy(p: np.ndarray) -> np.ndarray:
    """Vectorized base-2 binary entropy."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    inner = (p > 0) & (p < 1)
    q = p[inner]
    out[inner] = -q * np.log2(q) - (1 - q) * np.log2(1 - q)
    return out


@dataclass
class TopNSelection:
    """Per-layer sorted index arrays of the n most frequently active neurons."""

    layers: list[np.ndarray]
    n: int


class ActivationStats:
    """Selection counters for every hidden neuron, accumulated over batches."""

    def __init__(self, widths: list[int], ks: list[int]):
        self.widths = list(widths)
        self.ks = list(ks)
        self.counts = [np.zeros(r, dtype=np.int64) for r in widths]
        self.total_samples = 0

    @classmethod
    def for_model(cls, model: SdmlpModel) -> "ActivationStats":
        return cls([s.out_dim for s in model.specs], [s.k for s in model.specs])

    def record_batch(self, trace: ForwardTrace) -> None:
        """Increment a_i once per sample where neuron i was in the active set."""
        if len(trace.active) != len(self.counts):
            raise ValueError("trace layer count does not match stats")
        for counts, active, r in zip(self.counts, trace.active, self.widths):
            if active.max(initial=-1) >= r:
                raise ValueError("trace layer width does not match stats")
            np.add.at(counts, active.ravel(), 1)
        self.total_samples += trace.batch_size

    def frequencies(self) -> list[np.ndarray]:
        if self.total_samples == 0:
            raise ValueError("no samples recorded")
        return [c / self.total_samples for c in self.counts]

    def entropies(self) -> list[np.ndarray]:
        return [binary_entropy(p) for p in self.frequencies()]


def select_top_n(stats: ActivationStats, n: int) -> TopNSelection:
    """Top-n neurons per layer by selection count, ties to the lower index."""
    layers = []
    for counts, k in zip(stats.counts, stats.ks):
        r = counts.size
        if not k <= n <= r:
            raise ValueError(f"n={n} must be in [k={k}, r={r}]")
        order = np.argsort(-counts, kind="stable")
        layers.append(np.sort(order[:n]))
    return TopNSelection(layers=layers, n=n)


def mean_entropy(stats: ActivationStats) -> float:
    """Arithmetic mean of per-neuron entropies over all hidden neurons."""
    if stats.total_samples == 0:
        raise ValueError("no samples recorded")
    return float(np.mean(np.concatenate(stats.entropies())))
