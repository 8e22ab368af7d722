"""One simulated hospital: local SGD against the augmented objective.

A client receives the current global parameters, trains for a fixed number
of epochs with the global vector as proximal anchor, and reports its final
parameters together with epoch-mean training loss/accuracy and its step
count (the step count feeds normalized averaging on the server).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data_pipeline import LabeledDataset
from .errors import ConfigurationError, DivergenceError, InputError
from .nn_core import (
    DEFAULT_SCALE_CLAMP,
    Batch,
    ModelSpec,
    ObjectiveSpec,
    forward,
    loss_and_grad,
    predictions_from_cache,
    sgd_step,
)


@dataclass
class ClientConfig:
    client_id: int
    lr: float = 0.05
    batch_size: int = 32
    local_epochs: int = 1

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigurationError("lr must be >= 0")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.local_epochs < 1:
            raise ConfigurationError("local_epochs must be >= 1")


@dataclass
class ClientReport:
    """What a client sends back after one round of local training."""

    local_params: np.ndarray
    train_loss: float
    train_acc: float
    sample_count: int
    steps_taken: int


def local_train(
    global_params: np.ndarray,
    data: LabeledDataset,
    cfg: ClientConfig,
    model: ModelSpec,
    mu: float,
    f_bar: float | None = None,
    lambda_fair: float = 0.0,
    seed=0,
    scale_clamp=DEFAULT_SCALE_CLAMP,
) -> ClientReport:
    """Run `cfg.local_epochs` of minibatch SGD from the global parameters.

    The anchor for the proximal term is the incoming global vector, which is
    never mutated.  Minibatch order is reshuffled each epoch from `seed`;
    reported loss/accuracy are size-weighted means over the final epoch's
    batches, measured before each update.
    """
    global_params = np.asarray(global_params, dtype=np.float64)
    if global_params.shape != (model.param_count,):
        raise ConfigurationError("global parameter vector does not match the model")
    if mu < 0:
        raise ConfigurationError("mu must be >= 0")
    rng = np.random.default_rng(seed)
    anchor = global_params.copy()
    params = global_params.copy()
    spec = ObjectiveSpec(mu, anchor, lambda_fair, f_bar, scale_clamp)

    n = len(data)
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    losses: list[float] = []
    accs: list[float] = []
    sizes: list[int] = []
    for epoch in range(cfg.local_epochs):
        order = rng.permutation(n)
        losses, accs, sizes = [], [], []
        for step in range(steps_per_epoch):
            idx = order[step * cfg.batch_size : (step + 1) * cfg.batch_size]
            batch = Batch(data.features[idx], data.labels[idx])
            net = model.net(params)
            base_loss, acc, _ = forward(net, batch)
            try:
                _, grad, _ = loss_and_grad(net, batch, spec)
            except DivergenceError as err:
                raise DivergenceError(
                    f"client {cfg.client_id} diverged at epoch {epoch} step {step}: {err}"
                ) from err
            losses.append(base_loss)
            accs.append(acc)
            sizes.append(len(idx))
            params = sgd_step(params, grad, cfg.lr)

    weights = np.asarray(sizes, dtype=np.float64)
    weights /= weights.sum()
    return ClientReport(
        local_params=params,
        train_loss=float(np.dot(weights, losses)),
        train_acc=float(np.dot(weights, accs)),
        sample_count=n,
        steps_taken=steps_per_epoch * cfg.local_epochs,
    )


def evaluate(params: np.ndarray, model: ModelSpec, data: LabeledDataset):
    """Full-dataset loss, accuracy, and per-class recall; no mutation.

    Classes absent from `data` get recall 0.0.
    """
    if len(data) == 0:
        raise InputError("cannot evaluate on an empty dataset")
    net = model.net(np.asarray(params, dtype=np.float64))
    batch = Batch(data.features, data.labels)
    loss, acc, cache = forward(net, batch)
    preds = predictions_from_cache(cache)
    m = model.num_classes
    recall = np.zeros(m)
    for c in range(m):
        mask = data.labels == c
        if mask.any():
            recall[c] = float((preds[mask] == c).mean())
    return loss, acc, recall


def confusion_matrix(params: np.ndarray, model: ModelSpec, data: LabeledDataset) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    net = model.net(np.asarray(params, dtype=np.float64))
    batch = Batch(data.features, data.labels)
    _, _, cache = forward(net, batch)
    preds = predictions_from_cache(cache)
    m = model.num_classes
    matrix = np.zeros((m, m), dtype=np.int64)
    np.add.at(matrix, (data.labels, preds), 1)
    return matrix
