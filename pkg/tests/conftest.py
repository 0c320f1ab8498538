"""Shared fixtures and finite-difference helpers for the test suite."""

import numpy as np
import pytest

from sparsecl.model import LayerSpec, forward, init_model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_model():
    """One hidden layer, 4 -> 6 (k=3), 3 classes."""
    return init_model([LayerSpec(4, 6, 3)], class_count=3, seed=0)


def random_small_net(rng, max_in=8, max_hidden=8, max_classes=4, max_layers=2):
    """A random small SDMLP for finite-difference oracles."""
    in_dim = int(rng.integers(2, max_in + 1))
    layers = int(rng.integers(1, max_layers + 1))
    specs = []
    prev = in_dim
    for _ in range(layers):
        width = int(rng.integers(2, max_hidden + 1))
        k = int(rng.integers(1, width + 1))
        specs.append(LayerSpec(prev, width, k))
        prev = width
    classes = int(rng.integers(2, max_classes + 1))
    seed = int(rng.integers(0, 2**31))
    return init_model(specs, classes, seed)


def frozen_active(model, x):
    """Top-K index sets of a forward pass, to pin masks during FD probing."""
    trace = forward(model, x)
    return [a.copy() for a in trace.active]


def fd_grad(loss_fn, model, h=1e-6):
    """Central finite differences of loss_fn(model) over every weight.

    Returns (hidden_grads, output_grad) matching the model's shapes.
    """
    def perturbed(mats, layer, pos, delta):
        out = [m.copy() for m in mats]
        out[layer][pos] += delta
        return out

    hidden_grads = []
    for l, w in enumerate(model.hidden):
        g = np.zeros_like(w)
        for pos in np.ndindex(w.shape):
            m_plus = model.snapshot()
            m_plus.hidden = perturbed(model.hidden, l, pos, h)
            m_minus = model.snapshot()
            m_minus.hidden = perturbed(model.hidden, l, pos, -h)
            g[pos] = (loss_fn(m_plus) - loss_fn(m_minus)) / (2 * h)
        hidden_grads.append(g)
    g_out = np.zeros_like(model.output)
    for pos in np.ndindex(model.output.shape):
        m_plus = model.snapshot()
        m_plus.output = model.output.copy()
        m_plus.output[pos] += h
        m_minus = model.snapshot()
        m_minus.output = model.output.copy()
        m_minus.output[pos] -= h
        g_out[pos] = (loss_fn(m_plus) - loss_fn(m_minus)) / (2 * h)
    return hidden_grads, g_out


def rel_error(analytic, numeric):
    """Norm-based relative error between two gradient stacks."""
    a = np.concatenate([np.ravel(g) for g in analytic])
    b = np.concatenate([np.ravel(g) for g in numeric])
    denom = max(np.linalg.norm(b), 1e-8)
    return np.linalg.norm(a - b) / denom
