"""Shared test helpers: finite-difference oracles and random fixtures."""

from __future__ import annotations

import numpy as np

from fedmrl.nn_core import Batch, DenseNet, ModelSpec


def fd_gradient(objective, params: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar objective over a flat vector."""
    grad = np.zeros_like(params)
    for i in range(params.size):
        bumped = params.copy()
        bumped[i] += step
        hi = objective(bumped)
        bumped[i] -= 2.0 * step
        lo = objective(bumped)
        grad[i] = (hi - lo) / (2.0 * step)
    return grad


def max_rel_err(a: np.ndarray, b: np.ndarray, floor: float = 1e-4) -> float:
    """Elementwise relative error with a magnitude floor for tiny entries."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def random_net(rng: np.random.Generator, activation: str = "tanh") -> DenseNet:
    sizes = (3, 5, 4, 3)
    spec = ModelSpec(sizes, activation)
    return spec.net(spec.init(rng))


def random_batch(rng: np.random.Generator, n: int = 8, dim: int = 3, classes: int = 3) -> Batch:
    return Batch(rng.normal(size=(n, dim)), rng.integers(classes, size=n))


def kink_free(net: DenseNet, batch: Batch, margin: float) -> bool:
    """True when no relu pre-activation sits within `margin` of its kink.

    Central differences straddle the kink otherwise, so finite-difference
    oracles must skip such configurations.  Always true for smooth nets.
    """
    if net.activation != "relu":
        return True
    from fedmrl.nn_core import mlp_forward

    _, (_, _, _, pre, _) = mlp_forward(net.params, net.layer_sizes, net.activation, batch.features)
    return all(np.abs(z).min() > margin for z in pre[:-1])
