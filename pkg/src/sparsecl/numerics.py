"""Dense vector kernels and probability utilities shared by every module.

Everything here is pure, double precision, and deterministic. Losses use
natural log; binary activation entropy (tracking module) uses base 2.
"""

from __future__ import annotations

import numpy as np

# Floor applied to the second argument of kl_div before the log. Softmax never
# produces exact zeros analytically, but float underflow can.
KL_EPS = 1e-12


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale v to unit L2 norm. The zero vector maps to itself."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return v.copy()
    return v / norm


def l2_normalize_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise l2_normalize for a 2-D batch; all-zero rows stay zero."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return x / safe


def softmax_temp(z: np.ndarray, temperature: float) -> np.ndarray:
    """Temperature-scaled softmax, computed with max-subtraction for stability."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = np.asarray(z, dtype=np.float64) / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_temp_rows(z: np.ndarray, temperature: float) -> np.ndarray:
    """Row-wise softmax_temp for a 2-D batch."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = np.asarray(z, dtype=np.float64) / temperature
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def kl_div(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) in nats, with 0*log(0/q) := 0 and q floored at KL_EPS."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    q = np.maximum(q, KL_EPS)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity a.b / (|a||b|); rejects zero-norm inputs."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine_sim is undefined for zero-norm inputs")
    return float(np.dot(a, b) / (na * nb))


def topk_indices(v: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries, ties broken by lower index.

    Returned sorted ascending so index sets compare deterministically.
    """
    v = np.asarray(v, dtype=np.float64)
    if not 1 <= k <= v.size:
        raise ValueError(f"k={k} out of range for vector of size {v.size}")
    # Stable argsort on the negated values keeps lower indices first on ties.
    order = np.argsort(-v, kind="stable")
    return np.sort(order[:k])


def topk_indices_rows(z: np.ndarray, k: int) -> np.ndarray:
    """Row-wise topk_indices for a 2-D batch; returns a (B, k) int array."""
    z = np.asarray(z, dtype=np.float64)
    if not 1 <= k <= z.shape[1]:
        raise ValueError(f"k={k} out of range for row width {z.shape[1]}")
    order = np.argsort(-z, axis=1, kind="stable")[:, :k]
    return np.sort(order, axis=1)
