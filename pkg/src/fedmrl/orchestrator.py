"""The federated training loop and its baselines.

One experiment builds a dataset, holds out a stratified evaluation split,
partitions the rest across clients, and runs T rounds of one of four
algorithms:

  fedavg   clients minimize plain cross-entropy; size-weighted averaging
  fedprox  same but with a fixed proximal coefficient
  fednova  plain clients; updates normalized by local step counts
  fedmrl   per-client proximal coefficients from the RL controller, the
           fairness penalty against the broadcast mean loss, and
           SOM/similarity-weighted aggregation

All randomness flows from named substreams of the master seed, so runs are
reproducible and the client-side streams are identical across algorithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import fed_client
from .data_pipeline import (
    LabeledDataset,
    PartitionPlan,
    client_statistics,
    load_csv_dataset,
    partition,
    synth_gaussian_mixture,
)
from .errors import ConfigurationError, DivergenceError
from .nn_core import ModelSpec
from .qmix_controller import (
    ClientState,
    GlobalState,
    QmixController,
    RlConfig,
    reward,
)
from .rng import derived_seed, named_rng, seed_sequence
from .som_aggregator import Projector, SomGrid, aggregate, compute_alphas, weighted_average

ALGORITHMS = ("fedavg", "fedprox", "fednova", "fedmrl")


@dataclass
class DataConfig:
    source: str = "synthetic"
    classes: int = 3
    per_class: int = 600
    dim: int = 2
    separation: float = 3.0
    csv_path: str | None = None

    def __post_init__(self):
        if self.source not in ("synthetic", "csv"):
            raise ConfigurationError(f"data.source must be synthetic or csv, got {self.source!r}")
        if self.source == "csv" and not self.csv_path:
            raise ConfigurationError("data.csv_path required when data.source = csv")
        if self.classes < 2:
            raise ConfigurationError("data.classes must be >= 2")
        if self.per_class < 1 or self.dim < 1:
            raise ConfigurationError("data.per_class and data.dim must be >= 1")
        if self.separation < 0:
            raise ConfigurationError("data.separation must be >= 0")


@dataclass
class PartitionConfig:
    eta: float = 1.0
    shards_per_class: int = 200

    def __post_init__(self):
        if not (0.0 <= self.eta <= 1.0):
            raise ConfigurationError("partition.eta must be in [0, 1]")
        if self.shards_per_class < 1:
            raise ConfigurationError("partition.shards_per_class must be >= 1")


@dataclass
class SomConfig:
    feature_dim: int = 32
    rows: int = 5
    cols: int = 5
    sigma0: float = 2.5
    lr0: float = 0.5
    decay_horizon: int | None = None  # None: use the round count

    def __post_init__(self):
        if self.feature_dim < 1 or self.rows < 1 or self.cols < 1:
            raise ConfigurationError("som dimensions must be >= 1")
        if self.sigma0 <= 0 or self.lr0 < 0:
            raise ConfigurationError("som.sigma0 > 0 and som.lr0 >= 0 required")


@dataclass
class ExperimentConfig:
    algo: str = "fedavg"
    clients: int = 5
    rounds: int = 30
    hidden: tuple[int, ...] = (32,)
    activation: str = "relu"
    lr: float = 0.05
    batch_size: int = 32
    local_epochs: int = 1
    mu: float = 0.1
    lambda_fair: float = 1.0
    seed: int = 0
    eval_fraction: float = 0.2
    data: DataConfig = field(default_factory=DataConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    rl: RlConfig = field(default_factory=RlConfig)
    som: SomConfig = field(default_factory=SomConfig)

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ConfigurationError(f"algo must be one of {ALGORITHMS}, got {self.algo!r}")
        if self.clients < 2:
            raise ConfigurationError("clients must be >= 2")
        if self.rounds < 1:
            raise ConfigurationError("rounds must be >= 1")
        if self.lr < 0 or self.batch_size < 1 or self.local_epochs < 1:
            raise ConfigurationError("bad client training settings")
        if self.mu < 0:
            raise ConfigurationError("mu must be >= 0")
        if self.lambda_fair < 0:
            raise ConfigurationError("lambda_fair must be >= 0")
        if not (0.0 < self.eval_fraction < 1.0):
            raise ConfigurationError("eval_fraction must be in (0, 1)")
        if self.seed < 0:
            raise ConfigurationError("seed must be >= 0")
        self.hidden = tuple(int(h) for h in self.hidden)


@dataclass
class RoundRecord:
    """Everything the reporting layer needs about one communication round."""

    round_index: int
    global_acc: float
    global_loss: float
    reward_value: float
    client_losses: np.ndarray
    client_accs: np.ndarray
    mus: np.ndarray
    alphas: np.ndarray
    loss_variance: float
    per_class_recall: np.ndarray


@dataclass
class RunResult:
    records: list[RoundRecord]
    final_params: np.ndarray
    final_confusion: np.ndarray
    param_trajectory: list[np.ndarray] | None = None


def stratified_split(dataset: LabeledDataset, eval_fraction: float, rng):
    """Per-class random split into (train, eval); both sides stay nonempty."""
    train_idx: list[np.ndarray] = []
    eval_idx: list[np.ndarray] = []
    for m in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.labels == m)
        if idx.size == 0:
            continue
        perm = rng.permutation(idx)
        n_eval = int(round(eval_fraction * idx.size))
        n_eval = min(max(n_eval, 1), idx.size - 1) if idx.size > 1 else 0
        eval_idx.append(perm[:n_eval])
        train_idx.append(perm[n_eval:])
    return (
        dataset.subset(np.concatenate(train_idx)),
        dataset.subset(np.concatenate(eval_idx)),
    )


def fednova_aggregate(global_params, local_params, sample_counts, step_counts) -> np.ndarray:
    """Normalized averaging: per-client deltas are scaled by 1/steps before
    the size-weighted mean, then re-scaled by the effective step count."""
    global_params = np.asarray(global_params, dtype=np.float64)
    sizes = np.asarray(sample_counts, dtype=np.float64)
    steps = np.asarray(step_counts, dtype=np.float64)
    if np.any(steps <= 0):
        raise ConfigurationError("every client must report a positive step count")
    shares = sizes / sizes.sum()
    tau_eff = float(np.dot(shares, steps))
    combined = np.zeros_like(global_params)
    for share, step, local in zip(shares, steps, local_params):
        combined += share * (global_params - np.asarray(local, dtype=np.float64)) / step
    return global_params - tau_eff * combined


def fairness_penalty(losses) -> float:
    """Sum of squared deviations of each loss from the mean loss."""
    losses = np.asarray(losses, dtype=np.float64)
    gaps = losses - losses.mean()
    return float(np.dot(gaps, gaps))


def fairness_landscape(total_loss: float, grid_n: int) -> np.ndarray:
    """Two-client penalty curve over client 1's loss at fixed total loss.

    Returns (grid_n, 2) rows of (loss_1, penalty); the minimum sits at the
    equal split total_loss / 2.
    """
    if grid_n < 3:
        raise ConfigurationError("grid_n must be >= 3")
    f1 = np.linspace(0.0, total_loss, grid_n)
    f2 = total_loss - f1
    f_bar = total_loss / 2.0
    penalty = (f1 - f_bar) ** 2 + (f2 - f_bar) ** 2
    return np.column_stack([f1, penalty])


def fairness_descent_check(initial_losses, steps: int, lr: float) -> np.ndarray:
    """Gradient descent on the fairness penalty; converges to the common mean.

    The gradient w.r.t. loss j is 2 * (loss_j - mean), so the mean is
    preserved along the trajectory.
    """
    losses = np.asarray(initial_losses, dtype=np.float64).copy()
    if losses.size < 2:
        raise ConfigurationError("need at least two losses")
    for _ in range(steps):
        losses = losses - lr * 2.0 * (losses - losses.mean())
    return losses


class Experiment:
    """Mutable state of one run; `run_experiment` is the usual entry point.

    `controller` and `alpha_fn` may be injected to replace the RL controller
    and the SOM weighting (e.g. with constant policies) while keeping every
    other code path identical.
    """

    def __init__(self, cfg: ExperimentConfig, controller=None, alpha_fn=None):
        self.cfg = cfg
        dataset = self._build_dataset(cfg)
        split_rng = named_rng(cfg.seed, "split")
        self.train_data, self.eval_data = stratified_split(dataset, cfg.eval_fraction, split_rng)
        plan = PartitionPlan(
            eta=cfg.partition.eta,
            client_count=cfg.clients,
            shards_per_class=cfg.partition.shards_per_class,
            rng_seed=derived_seed(cfg.seed, "partition"),
        )
        self.client_data = partition(self.train_data, plan)
        self.stats = client_statistics(self.client_data)
        self.model = ModelSpec((dataset.dim, *cfg.hidden, dataset.num_classes), cfg.activation)
        self.global_params = self.model.init(named_rng(cfg.seed, "model-init"))
        self.f_bar: float | None = None
        self.f_bar_trace: list[float | None] = []

        if cfg.algo == "fedmrl":
            rl_cfg = cfg.rl
            if rl_cfg.epsilon_decay_rounds <= 0:
                rl_cfg = replace(rl_cfg, epsilon_decay_rounds=max(1, math.ceil(0.6 * cfg.rounds)))
            self.controller = controller or QmixController(
                cfg.clients,
                dataset.num_classes,
                rl_cfg,
                seed=seed_sequence(cfg.seed, "controller"),
            )
            if alpha_fn is None:
                som_rng = named_rng(cfg.seed, "som")
                horizon = cfg.som.decay_horizon or cfg.rounds
                self.som = SomGrid.initialized(
                    cfg.som.feature_dim,
                    som_rng,
                    rows=cfg.som.rows,
                    cols=cfg.som.cols,
                    sigma0=cfg.som.sigma0,
                    lr0=cfg.som.lr0,
                    decay_horizon=horizon,
                )
                self.projector = Projector.initialized(
                    cfg.som.feature_dim, self.model.param_count, som_rng
                )
                alpha_fn = self._som_alphas
            self.alpha_fn = alpha_fn
            self._mu_indices: np.ndarray | None = None
            self._mus: np.ndarray | None = None
            self._prev_selection_state: GlobalState | None = None

    @staticmethod
    def _build_dataset(cfg: ExperimentConfig) -> LabeledDataset:
        if cfg.data.source == "csv":
            return load_csv_dataset(cfg.data.csv_path, cfg.data.classes)
        return synth_gaussian_mixture(
            cfg.data.classes,
            cfg.data.per_class,
            cfg.data.dim,
            cfg.data.separation,
            derived_seed(cfg.seed, "data"),
        )

    def _som_alphas(self, local_params, global_params, round_index):
        return compute_alphas(self.som, local_params, global_params, self.projector, round_index)

    def _train_clients(self, round_index: int, mus, f_bar, lambda_fair):
        reports = []
        for h in range(self.cfg.clients):
            client_cfg = fed_client.ClientConfig(
                client_id=h,
                lr=self.cfg.lr,
                batch_size=self.cfg.batch_size,
                local_epochs=self.cfg.local_epochs,
            )
            try:
                reports.append(
                    fed_client.local_train(
                        self.global_params,
                        self.client_data[h],
                        client_cfg,
                        self.model,
                        mu=float(mus[h]),
                        f_bar=f_bar,
                        lambda_fair=lambda_fair,
                        seed=seed_sequence(self.cfg.seed, "client", h, round_index),
                    )
                )
            except DivergenceError as err:
                raise DivergenceError(f"round {round_index}: {err}") from err
        return reports

    def _finish_round(self, round_index, new_global, reports, mus, alphas):
        loss, acc, recall = fed_client.evaluate(new_global, self.model, self.eval_data)
        client_losses = np.array([r.train_loss for r in reports])
        record = RoundRecord(
            round_index=round_index,
            global_acc=acc,
            global_loss=loss,
            reward_value=reward(acc, self.cfg.rl.zeta),
            client_losses=client_losses,
            client_accs=np.array([r.train_acc for r in reports]),
            mus=np.asarray(mus, dtype=np.float64),
            alphas=np.asarray(alphas, dtype=np.float64),
            loss_variance=float(np.var(client_losses)),
            per_class_recall=recall,
        )
        self.global_params = new_global
        return record

    def _size_weights(self, reports) -> np.ndarray:
        sizes = np.array([r.sample_count for r in reports], dtype=np.float64)
        return sizes / sizes.sum()

    def run_round_fedavg(self, round_index: int) -> RoundRecord:
        mus = np.zeros(self.cfg.clients)
        reports = self._train_clients(round_index, mus, None, 0.0)
        weights = self._size_weights(reports)
        new_global = weighted_average([r.local_params for r in reports], weights)
        return self._finish_round(round_index, new_global, reports, mus, self.cfg.clients * weights)

    def run_round_fedprox(self, round_index: int) -> RoundRecord:
        mus = np.full(self.cfg.clients, self.cfg.mu)
        reports = self._train_clients(round_index, mus, None, 0.0)
        weights = self._size_weights(reports)
        new_global = weighted_average([r.local_params for r in reports], weights)
        return self._finish_round(round_index, new_global, reports, mus, self.cfg.clients * weights)

    def run_round_fednova(self, round_index: int) -> RoundRecord:
        mus = np.zeros(self.cfg.clients)
        reports = self._train_clients(round_index, mus, None, 0.0)
        new_global = fednova_aggregate(
            self.global_params,
            [r.local_params for r in reports],
            [r.sample_count for r in reports],
            [r.steps_taken for r in reports],
        )
        weights = self._size_weights(reports)
        return self._finish_round(round_index, new_global, reports, mus, self.cfg.clients * weights)

    def run_round_fedmrl(self, round_index: int) -> RoundRecord:
        if round_index == 0:
            self._mu_indices, self._mus = self.controller.controller_round(
                None, None, None, None, 0
            )
        mus = self._mus
        self.f_bar_trace.append(self.f_bar)
        reports = self._train_clients(round_index, mus, self.f_bar, self.cfg.lambda_fair)

        state = GlobalState(
            [
                ClientState(s.entropy, s.proportion, r.train_acc, r.train_loss)
                for s, r in zip(self.stats, reports)
            ]
        )
        local_params = [r.local_params for r in reports]
        alphas = np.asarray(self.alpha_fn(local_params, self.global_params, round_index))
        new_global = aggregate(local_params, alphas)
        record = self._finish_round(round_index, new_global, reports, mus, alphas)

        self._mu_indices, self._mus = self.controller.controller_round(
            self._prev_selection_state,
            self._mu_indices,
            record.reward_value,
            state,
            round_index + 1,
        )
        self._prev_selection_state = state
        self.f_bar = float(np.mean([r.train_loss for r in reports]))
        return record

    def run(self, on_record=None, keep_param_trajectory: bool = False) -> RunResult:
        round_fn = {
            "fedavg": self.run_round_fedavg,
            "fedprox": self.run_round_fedprox,
            "fednova": self.run_round_fednova,
            "fedmrl": self.run_round_fedmrl,
        }[self.cfg.algo]
        records: list[RoundRecord] = []
        trajectory: list[np.ndarray] = []
        for t in range(self.cfg.rounds):
            record = round_fn(t)
            records.append(record)
            if keep_param_trajectory:
                trajectory.append(self.global_params.copy())
            if on_record is not None:
                on_record(record)
        confusion = fed_client.confusion_matrix(self.global_params, self.model, self.eval_data)
        return RunResult(
            records=records,
            final_params=self.global_params,
            final_confusion=confusion,
            param_trajectory=trajectory if keep_param_trajectory else None,
        )


def run_experiment(
    cfg: ExperimentConfig,
    on_record=None,
    controller=None,
    alpha_fn=None,
    keep_param_trajectory: bool = False,
) -> RunResult:
    """Build and run one experiment; see `Experiment` for injection hooks."""
    experiment = Experiment(cfg, controller=controller, alpha_fn=alpha_fn)
    return experiment.run(on_record=on_record, keep_param_trajectory=keep_param_trajectory)
