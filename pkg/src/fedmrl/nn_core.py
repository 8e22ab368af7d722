"""Minimal dense classifier with exact analytic gradients and SGD.

All model state lives in flat float64 parameter vectors so networks can be
exchanged, averaged, and anchored without touching layer structure.  The
training objective augments cross-entropy with a proximal pull toward an
anchor vector and a squared penalty against a broadcast reference loss:

    J(w) = CE(w) + (mu/2) * ||w - anchor||^2 + lam * (CE(w) - f_bar)^2

By the chain rule the gradient of the CE-plus-penalty part is the plain
cross-entropy gradient scaled by (1 + 2*lam*(CE - f_bar)).  That scale is
clamped to a positive interval so a client whose loss sits far below the
reference never has its descent direction reversed; the proximal part
mu * (w - anchor) is added unclamped.

The layer-level forward/backward helpers (`mlp_forward`, `mlp_backward`)
expose generic vector-Jacobian products over the same flat layout, which the
RL controller reuses for its Q-networks and hypernetworks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DivergenceError

DEFAULT_SCALE_CLAMP = (0.1, 10.0)


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, a):
    return (z > 0.0).astype(np.float64)


def _tanh(z):
    return np.tanh(z)


def _tanh_grad(z, a):
    return 1.0 - a * a


_ACTIVATIONS = {"relu": (_relu, _relu_grad), "tanh": (_tanh, _tanh_grad)}


def param_count(layer_sizes) -> int:
    """Total parameter count: (fan_in + 1) * fan_out summed over layers."""
    return int(sum((i + 1) * o for i, o in zip(layer_sizes[:-1], layer_sizes[1:])))


def _layer_views(params, layer_sizes):
    """Yield (W, b) array views into a flat parameter vector, layer by layer."""
    views = []
    offset = 0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w = params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params[offset : offset + fan_out]
        offset += fan_out
        views.append((w, b))
    if offset != params.shape[0]:
        raise ConfigurationError(
            f"parameter vector has {params.shape[0]} entries, layout needs {offset}"
        )
    return views


def init_params(layer_sizes, activation: str, rng: np.random.Generator) -> np.ndarray:
    """Kaiming-style scaled Gaussian weights, zero biases."""
    if activation not in _ACTIVATIONS:
        raise ConfigurationError(f"unknown activation {activation!r}")
    gain = 2.0 if activation == "relu" else 1.0
    params = np.zeros(param_count(layer_sizes), dtype=np.float64)
    for w, _ in _layer_views(params, layer_sizes):
        fan_in = w.shape[0]
        w[...] = rng.normal(0.0, np.sqrt(gain / fan_in), size=w.shape)
    return params


def mlp_forward(params, layer_sizes, activation, x):
    """Batched forward pass; hidden layers are activated, the last is affine.

    Returns (output, cache) where output is (batch, out_dim) and the cache
    feeds `mlp_backward`.
    """
    act, _ = _ACTIVATIONS[activation]
    views = _layer_views(params, layer_sizes)
    a = np.asarray(x, dtype=np.float64)
    pre = []
    acts = [a]
    for index, (w, b) in enumerate(views):
        z = a @ w + b
        pre.append(z)
        a = act(z) if index < len(views) - 1 else z
        acts.append(a)
    return a, (params, tuple(layer_sizes), activation, pre, acts)


def mlp_backward(cache, d_out):
    """Vector-Jacobian product for `mlp_forward`.

    Returns (param_grad, input_grad); the parameter gradient is summed over
    the batch, matching a d_out that already carries any 1/batch factor.
    """
    params, layer_sizes, activation, pre, acts = cache
    _, act_grad = _ACTIVATIONS[activation]
    grad = np.zeros_like(params)
    param_views = _layer_views(params, layer_sizes)
    grad_views = _layer_views(grad, layer_sizes)
    d_z = np.asarray(d_out, dtype=np.float64)
    d_a = d_z
    for index in range(len(param_views) - 1, -1, -1):
        w, _ = param_views[index]
        g_w, g_b = grad_views[index]
        g_w[...] = acts[index].T @ d_z
        g_b[...] = d_z.sum(axis=0)
        d_a = d_z @ w.T
        if index > 0:
            d_z = d_a * act_grad(pre[index - 1], acts[index])
    return grad, d_a


@dataclass
class ModelSpec:
    """Network architecture without parameters: layer sizes plus activation."""

    layer_sizes: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or any(s < 1 for s in self.layer_sizes):
            raise ConfigurationError(f"bad layer sizes {self.layer_sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")

    @property
    def param_count(self) -> int:
        return param_count(self.layer_sizes)

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]

    def init(self, rng: np.random.Generator) -> np.ndarray:
        return init_params(self.layer_sizes, self.activation, rng)

    def net(self, params: np.ndarray) -> "DenseNet":
        return DenseNet(self.layer_sizes, self.activation, params)


@dataclass
class DenseNet:
    """A dense classifier: architecture plus one flat parameter vector."""

    layer_sizes: tuple[int, ...]
    activation: str
    params: np.ndarray

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if self.activation not in _ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        self.params = np.asarray(self.params, dtype=np.float64)
        expected = param_count(self.layer_sizes)
        if self.params.shape != (expected,):
            raise ConfigurationError(
                f"parameter vector length {self.params.shape} does not match "
                f"architecture {self.layer_sizes} (needs {expected})"
            )

    @classmethod
    def initialized(cls, layer_sizes, activation: str, rng: np.random.Generator):
        return cls(layer_sizes, activation, init_params(layer_sizes, activation, rng))


@dataclass
class Batch:
    """A minibatch of feature rows and integer class labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ConfigurationError("features must be (batch, dim) matching labels")
        if self.features.shape[0] < 1:
            raise ConfigurationError("batch must hold at least one sample")
        if not np.all(np.isfinite(self.features)):
            raise ConfigurationError("feature rows must be finite")

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass
class ObjectiveSpec:
    """Augmented-objective settings for one local training step.

    mu scales the proximal pull toward `anchor`; `lambda_fair` and `f_bar`
    control the squared penalty on the gap to the broadcast reference loss.
    When `f_bar` is None the penalty is skipped entirely.  `scale_clamp`
    bounds the multiplier applied to the cross-entropy gradient.
    """

    mu: float
    anchor: np.ndarray
    lambda_fair: float = 0.0
    f_bar: float | None = None
    scale_clamp: tuple[float, float] = DEFAULT_SCALE_CLAMP

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=np.float64)
        lo, hi = self.scale_clamp
        if self.mu < 0:
            raise ConfigurationError("mu must be >= 0")
        if self.lambda_fair < 0:
            raise ConfigurationError("lambda_fair must be >= 0")
        if not (lo > 0 and hi >= lo):
            raise ConfigurationError(f"bad scale clamp {self.scale_clamp}")


def forward(net: DenseNet, batch: Batch):
    """Mean cross-entropy loss, accuracy, and a cache for the backward pass.

    The loss uses log-sum-exp so large logits stay finite; accuracy breaks
    argmax ties toward the lowest class index.
    """
    if batch.features.shape[1] != net.layer_sizes[0]:
        raise ConfigurationError(
            f"batch dim {batch.features.shape[1]} != net input {net.layer_sizes[0]}"
        )
    if np.any(batch.labels < 0) or np.any(batch.labels >= net.layer_sizes[-1]):
        raise ConfigurationError("labels outside the network's class range")
    logits, mlp_cache = mlp_forward(net.params, net.layer_sizes, net.activation, batch.features)
    if not np.all(np.isfinite(logits)):
        raise DivergenceError("non-finite activations in forward pass")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_norm[:, None]
    n = len(batch)
    loss = float(-log_probs[np.arange(n), batch.labels].mean())
    accuracy = float((logits.argmax(axis=1) == batch.labels).mean())
    probs = np.exp(log_probs)
    return loss, accuracy, (mlp_cache, probs, batch.labels)


def predictions_from_cache(cache) -> np.ndarray:
    """Argmax class predictions recovered from a `forward` cache."""
    _, probs, _ = cache
    return probs.argmax(axis=1)


def loss_and_grad(net: DenseNet, batch: Batch, spec: ObjectiveSpec):
    """Augmented objective value, its gradient, and the raw cross-entropy.

    The returned gradient is clamp(1 + 2*lam*(CE - f_bar)) * grad_CE
    + mu * (w - anchor); the objective itself is reported unclamped.
    """
    if spec.anchor.shape != net.params.shape:
        raise ConfigurationError(
            f"anchor length {spec.anchor.shape} != parameter count {net.params.shape}"
        )
    base_loss, _, (mlp_cache, probs, labels) = forward(net, batch)
    n = len(batch)
    d_logits = probs.copy()
    d_logits[np.arange(n), labels] -= 1.0
    d_logits /= n
    base_grad, _ = mlp_backward(mlp_cache, d_logits)

    objective = base_loss
    grad = base_grad
    if spec.f_bar is not None:
        gap = base_loss - spec.f_bar
        objective = objective + spec.lambda_fair * gap * gap
        lo, hi = spec.scale_clamp
        scale = min(max(1.0 + 2.0 * spec.lambda_fair * gap, lo), hi)
        if scale != 1.0:
            grad = scale * base_grad
    if spec.mu > 0.0:
        displacement = net.params - spec.anchor
        objective = objective + 0.5 * spec.mu * float(displacement @ displacement)
        grad = grad + spec.mu * displacement
    if grad is base_grad:
        grad = base_grad.copy()
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient")
    return objective, grad, base_loss


def sgd_step(params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    """One plain gradient step: params - lr * grad."""
    if params.shape != grad.shape:
        raise ConfigurationError("params/grad length mismatch")
    if not (np.isfinite(lr) and lr >= 0):
        raise ConfigurationError(f"bad learning rate {lr}")
    return params - lr * grad


def l2_distance_sq(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Euclidean distance between two parameter vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigurationError("length mismatch")
    d = a - b
    return float(d @ d)
