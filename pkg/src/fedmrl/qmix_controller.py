"""Cooperative Q-learning controller that picks per-client proximal weights.

One agent per client observes a 4-feature summary of that client (label
entropy, data share, latest training accuracy, latest training loss) and
scores a shared grid of candidate proximal coefficients.  A state-conditioned
mixing network combines the per-agent scores of the chosen actions into a
joint value Q_tot; its weights come from hypernetworks fed the full state and
are passed through absolute value, so Q_tot is monotone in every agent's
score and the greedy joint action decomposes into per-agent argmaxes.  The
team trains from a single scalar reward with one-step TD targets, uniform
replay, and periodically synced target copies of every network.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DivergenceError, InputError
from .nn_core import init_params, mlp_backward, mlp_forward, param_count

DEFAULT_MU_LEVELS = (1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0)
OBS_DIM = 4
CHECKPOINT_VERSION = 1


@dataclass
class ClientState:
    """Per-client slice of the controller state: (entropy, share, acc, loss)."""

    entropy: float
    proportion: float
    accuracy: float
    loss: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.entropy, self.proportion, self.accuracy, self.loss])


@dataclass
class GlobalState:
    clients: list[ClientState]

    def flatten(self) -> np.ndarray:
        return np.concatenate([c.as_vector() for c in self.clients])

    def __len__(self) -> int:
        return len(self.clients)


@dataclass
class ActionGrid:
    """Discretized proximal-coefficient levels, ascending within [0, 1]."""

    levels: tuple[float, ...] = DEFAULT_MU_LEVELS

    def __post_init__(self):
        self.levels = tuple(float(v) for v in self.levels)
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigurationError("levels must be strictly ascending")
        if self.levels[0] < 0.0 or self.levels[-1] > 1.0:
            raise ConfigurationError("levels must lie within [0, 1]")

    def __len__(self) -> int:
        return len(self.levels)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.levels)


@dataclass
class Transition:
    state: GlobalState
    actions: np.ndarray
    reward: float
    next_state: GlobalState
    done: bool


@dataclass
class RlConfig:
    gamma: float = 0.99
    zeta: float = 0.7
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_rounds: int = 60
    replay_capacity: int = 500
    batch_size: int = 32
    target_sync: int = 20
    lr: float = 1e-3

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ConfigurationError("gamma must be in (0, 1]")
        if not (0.0 <= self.zeta <= 1.0):
            raise ConfigurationError("zeta must be in [0, 1]")
        if not (0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0):
            raise ConfigurationError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.replay_capacity < self.batch_size or self.batch_size < 1:
            raise ConfigurationError("replay capacity must cover the batch size")
        if self.target_sync < 1:
            raise ConfigurationError("target_sync must be >= 1")
        if self.lr <= 0:
            raise ConfigurationError("rl lr must be > 0")


def reward(acc_t: float, zeta: float) -> float:
    """exp(acc - zeta) - 1: zero at the target accuracy, increasing in acc."""
    if not (0.0 <= acc_t <= 1.0):
        raise ConfigurationError(f"accuracy {acc_t} outside [0, 1]")
    return float(np.expm1(acc_t - zeta))


def discounted_return(rewards, gamma: float) -> float:
    """Sum of gamma^(t-1) * r_t over a reward sequence (t starting at 1)."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size < 1:
        raise InputError("need at least one reward")
    return float(np.sum(r * gamma ** np.arange(r.size)))


def vdn_qtot(agent_qs) -> float:
    """Value-decomposition baseline: joint value is the plain sum."""
    return float(np.sum(np.asarray(agent_qs, dtype=np.float64)))


@dataclass
class MixerParams:
    """Hypernetwork parameters producing the state-conditioned mixer.

    hyper_w1: affine state -> (n_agents * embed) weights (abs applied)
    hyper_b1: affine state -> embed bias
    hyper_w2: affine state -> embed weights (abs applied)
    hyper_b2: one-hidden-layer net state -> embed -> 1 final bias
    """

    n_agents: int
    state_dim: int
    embed_dim: int
    hyper_w1: np.ndarray
    hyper_b1: np.ndarray
    hyper_w2: np.ndarray
    hyper_b2: np.ndarray

    @property
    def w1_sizes(self):
        return (self.state_dim, self.n_agents * self.embed_dim)

    @property
    def b1_sizes(self):
        return (self.state_dim, self.embed_dim)

    @property
    def w2_sizes(self):
        return (self.state_dim, self.embed_dim)

    @property
    def b2_sizes(self):
        return (self.state_dim, self.embed_dim, 1)

    @classmethod
    def initialized(cls, n_agents, state_dim, embed_dim, rng):
        return cls(
            n_agents=n_agents,
            state_dim=state_dim,
            embed_dim=embed_dim,
            hyper_w1=init_params((state_dim, n_agents * embed_dim), "relu", rng),
            hyper_b1=init_params((state_dim, embed_dim), "relu", rng),
            hyper_w2=init_params((state_dim, embed_dim), "relu", rng),
            hyper_b2=init_params((state_dim, embed_dim, 1), "relu", rng),
        )

    def copy(self) -> "MixerParams":
        return MixerParams(
            self.n_agents,
            self.state_dim,
            self.embed_dim,
            self.hyper_w1.copy(),
            self.hyper_b1.copy(),
            self.hyper_w2.copy(),
            self.hyper_b2.copy(),
        )


@dataclass
class QmixNets:
    """All online and target networks plus the action grid."""

    grid: ActionGrid
    num_classes: int
    agent_layer_sizes: tuple[int, ...]
    agent_activation: str
    agent_params: list[np.ndarray]
    mixer: MixerParams
    target_agent_params: list[np.ndarray]
    target_mixer: MixerParams
    mixer_mode: str = "hyper"
    update_count: int = 0

    @property
    def n_agents(self) -> int:
        return len(self.agent_params)

    @classmethod
    def build(
        cls,
        n_agents: int,
        num_classes: int,
        rng,
        grid: ActionGrid | None = None,
        hidden=(64, 64),
        embed_dim: int = 32,
        agent_activation: str = "relu",
    ) -> "QmixNets":
        if n_agents < 1:
            raise ConfigurationError("need at least one agent")
        if num_classes < 2:
            raise ConfigurationError("num_classes must be >= 2 (entropy normalization)")
        grid = grid or ActionGrid()
        sizes = (OBS_DIM, *hidden, len(grid))
        agent_params = [init_params(sizes, agent_activation, rng) for _ in range(n_agents)]
        mixer = MixerParams.initialized(n_agents, OBS_DIM * n_agents, embed_dim, rng)
        nets = cls(
            grid=grid,
            num_classes=num_classes,
            agent_layer_sizes=sizes,
            agent_activation=agent_activation,
            agent_params=agent_params,
            mixer=mixer,
            target_agent_params=[p.copy() for p in agent_params],
            target_mixer=mixer.copy(),
        )
        return nets

    def sync_targets(self) -> None:
        self.target_agent_params = [p.copy() for p in self.agent_params]
        self.target_mixer = self.mixer.copy()


def normalized_observations(state: GlobalState, num_classes: int) -> np.ndarray:
    """(n_agents, 4) matrix of squashed features for the networks.

    Entropy is divided by log(num_classes) and loss mapped through
    x / (1 + x); share and accuracy already live in [0, 1].
    """
    log_m = math.log(num_classes)
    rows = np.empty((len(state), OBS_DIM))
    for i, c in enumerate(state.clients):
        rows[i] = (c.entropy / log_m, c.proportion, c.accuracy, c.loss / (1.0 + c.loss))
    return rows


def _identity_mixer_arrays(n_agents: int, embed_dim: int, batch: int):
    # Pass-through configuration: the first embedding channel carries the sum
    # of the agent values, every produced bias is zero.
    w1 = np.zeros((batch, n_agents, embed_dim))
    w1[:, :, 0] = 1.0
    w2 = np.zeros((batch, embed_dim))
    w2[:, 0] = 1.0
    return w1, w2


def _mixer_forward(mixer: MixerParams, state_flat: np.ndarray, qs: np.ndarray, mode: str):
    """Batched mixing of chosen agent values into Q_tot.

    Returns (qtot, cache); the cache is None in identity mode, which is a
    diagnostic forward-only configuration.
    """
    batch, n_agents = qs.shape
    embed = mixer.embed_dim
    if mode == "identity":
        w1, w2 = _identity_mixer_arrays(n_agents, embed, batch)
        hidden = np.einsum("bh,bhe->be", qs, w1)
        qtot = (hidden * w2).sum(axis=1)
        return qtot, None
    if mode != "hyper":
        raise ConfigurationError(f"unknown mixer mode {mode!r}")

    w1_raw, w1_cache = mlp_forward(mixer.hyper_w1, mixer.w1_sizes, "relu", state_flat)
    b1, b1_cache = mlp_forward(mixer.hyper_b1, mixer.b1_sizes, "relu", state_flat)
    w2_raw, w2_cache = mlp_forward(mixer.hyper_w2, mixer.w2_sizes, "relu", state_flat)
    b2, b2_cache = mlp_forward(mixer.hyper_b2, mixer.b2_sizes, "relu", state_flat)

    w1 = np.abs(w1_raw).reshape(batch, n_agents, embed)
    w2 = np.abs(w2_raw)
    h_pre = np.einsum("bh,bhe->be", qs, w1) + b1
    h = np.tanh(h_pre)
    qtot = (h * w2).sum(axis=1) + b2[:, 0]
    cache = (mixer, qs, w1_raw, w1, w2_raw, w2, h, w1_cache, b1_cache, w2_cache, b2_cache)
    return qtot, cache


def _mixer_backward(cache, d_qtot: np.ndarray):
    """Gradients of sum(d_qtot * qtot) w.r.t. hyper params and chosen qs."""
    mixer, qs, w1_raw, w1, w2_raw, w2, h, w1_cache, b1_cache, w2_cache, b2_cache = cache
    batch, n_agents = qs.shape
    embed = mixer.embed_dim
    d_qtot = d_qtot.reshape(batch, 1)

    g_b2, _ = mlp_backward(b2_cache, d_qtot)
    d_w2 = h * d_qtot
    g_w2, _ = mlp_backward(w2_cache, d_w2 * np.sign(w2_raw))
    d_h = w2 * d_qtot
    d_h_pre = d_h * (1.0 - h * h)
    g_b1, _ = mlp_backward(b1_cache, d_h_pre)
    d_w1 = qs[:, :, None] * d_h_pre[:, None, :]
    d_w1_raw = (d_w1 * np.sign(w1_raw.reshape(batch, n_agents, embed))).reshape(batch, -1)
    g_w1, _ = mlp_backward(w1_cache, d_w1_raw)
    d_qs = np.einsum("bhe,be->bh", w1, d_h_pre)
    grads = {"hyper_w1": g_w1, "hyper_b1": g_b1, "hyper_w2": g_w2, "hyper_b2": g_b2}
    return grads, d_qs


def qmix_qtot(nets: QmixNets, state: GlobalState, chosen_qs) -> float:
    """Mix one vector of chosen per-agent values into the joint value."""
    qs = np.asarray(chosen_qs, dtype=np.float64).reshape(1, -1)
    if qs.shape[1] != nets.n_agents:
        raise ConfigurationError("need one chosen value per agent")
    obs = normalized_observations(state, nets.num_classes)
    qtot, _ = _mixer_forward(nets.mixer, obs.reshape(1, -1), qs, nets.mixer_mode)
    if not np.isfinite(qtot[0]):
        raise DivergenceError("non-finite mixer output")
    return float(qtot[0])


def agent_q_values(nets: QmixNets, state: GlobalState, target: bool = False) -> np.ndarray:
    """(n_agents, n_levels) matrix of per-agent action values for one state."""
    obs = normalized_observations(state, nets.num_classes)
    params = nets.target_agent_params if target else nets.agent_params
    out = np.empty((nets.n_agents, len(nets.grid)))
    for i in range(nets.n_agents):
        q, _ = mlp_forward(params[i], nets.agent_layer_sizes, nets.agent_activation, obs[i : i + 1])
        out[i] = q[0]
    return out


def select_actions(nets: QmixNets, state: GlobalState, epsilon: float, rng):
    """Per-agent epsilon-greedy pick over the action grid.

    Returns (level indices, mu values); greedy ties break to the lowest index.
    """
    if not (0.0 <= epsilon <= 1.0):
        raise ConfigurationError("epsilon must be in [0, 1]")
    q_values = agent_q_values(nets, state)
    indices = np.empty(nets.n_agents, dtype=np.int64)
    for i in range(nets.n_agents):
        if rng.random() < epsilon:
            indices[i] = rng.integers(len(nets.grid))
        else:
            indices[i] = int(np.argmax(q_values[i]))
    return indices, nets.grid.as_array()[indices]


def _stack_batch(nets: QmixNets, transitions):
    n = nets.n_agents
    batch = len(transitions)
    obs = np.empty((batch, n, OBS_DIM))
    next_obs = np.empty((batch, n, OBS_DIM))
    actions = np.empty((batch, n), dtype=np.int64)
    rewards = np.empty(batch)
    dones = np.empty(batch)
    for k, t in enumerate(transitions):
        obs[k] = normalized_observations(t.state, nets.num_classes)
        next_obs[k] = normalized_observations(t.next_state, nets.num_classes)
        actions[k] = np.asarray(t.actions, dtype=np.int64)
        rewards[k] = t.reward
        dones[k] = 1.0 if t.done else 0.0
    return obs, next_obs, actions, rewards, dones


def _td_loss_and_grads(nets: QmixNets, transitions, cfg: RlConfig):
    """Mean squared TD error plus gradients for every online network."""
    obs, next_obs, actions, rewards, dones = _stack_batch(nets, transitions)
    batch = len(transitions)
    n = nets.n_agents
    rows = np.arange(batch)

    chosen = np.empty((batch, n))
    agent_caches = []
    for i in range(n):
        q_all, cache = mlp_forward(
            nets.agent_params[i], nets.agent_layer_sizes, nets.agent_activation, obs[:, i, :]
        )
        chosen[:, i] = q_all[rows, actions[:, i]]
        agent_caches.append((cache, q_all.shape))
    qtot, mix_cache = _mixer_forward(nets.mixer, obs.reshape(batch, -1), chosen, "hyper")

    next_best = np.empty((batch, n))
    for i in range(n):
        q_next, _ = mlp_forward(
            nets.target_agent_params[i],
            nets.agent_layer_sizes,
            nets.agent_activation,
            next_obs[:, i, :],
        )
        next_best[:, i] = q_next.max(axis=1)
    qtot_next, _ = _mixer_forward(
        nets.target_mixer, next_obs.reshape(batch, -1), next_best, "hyper"
    )

    targets = rewards + cfg.gamma * (1.0 - dones) * qtot_next
    err = qtot - targets
    loss = float(np.mean(err * err))
    if not np.isfinite(loss):
        raise DivergenceError("non-finite TD loss")

    d_qtot = 2.0 * err / batch
    mixer_grads, d_chosen = _mixer_backward(mix_cache, d_qtot)
    agent_grads = []
    for i in range(n):
        cache, shape = agent_caches[i]
        d_q = np.zeros(shape)
        d_q[rows, actions[:, i]] = d_chosen[:, i]
        g, _ = mlp_backward(cache, d_q)
        agent_grads.append(g)
    return loss, agent_grads, mixer_grads


def td_update(nets: QmixNets, transitions, cfg: RlConfig) -> float:
    """One SGD step on agents and mixer toward the one-step TD target.

    Target copies are refreshed every `cfg.target_sync` updates.
    """
    if not transitions:
        raise InputError("empty transition batch")
    if nets.mixer_mode != "hyper":
        raise ConfigurationError("td_update requires the hyper mixer (identity is diagnostic)")
    loss, agent_grads, mixer_grads = _td_loss_and_grads(nets, transitions, cfg)
    for i in range(nets.n_agents):
        nets.agent_params[i] = nets.agent_params[i] - cfg.lr * agent_grads[i]
    for name, grad in mixer_grads.items():
        setattr(nets.mixer, name, getattr(nets.mixer, name) - cfg.lr * grad)
    nets.update_count += 1
    if nets.update_count % cfg.target_sync == 0:
        nets.sync_targets()
    return loss


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions with uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def push(self, transition: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._cursor] = transition
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, rng, k: int) -> list[Transition]:
        if k > len(self._items):
            raise InputError("not enough transitions to sample")
        idx = rng.choice(len(self._items), size=k, replace=False)
        return [self._items[i] for i in idx]

    def __len__(self) -> int:
        return len(self._items)

    def items(self) -> list[Transition]:
        return list(self._items)


def epsilon_at(cfg: RlConfig, round_index: int) -> float:
    """Linear decay from epsilon_start to epsilon_end over the decay window."""
    if cfg.epsilon_decay_rounds <= 0:
        return cfg.epsilon_end
    frac = min(1.0, round_index / cfg.epsilon_decay_rounds)
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac


class QmixController:
    """Owns the networks, replay buffer, exploration schedule, and RNG."""

    def __init__(
        self,
        n_agents: int,
        num_classes: int,
        cfg: RlConfig,
        grid: ActionGrid | None = None,
        seed=0,
        hidden=(64, 64),
        embed_dim: int = 32,
        agent_activation: str = "relu",
    ):
        self.cfg = cfg
        self._rng = np.random.default_rng(seed)
        self.nets = QmixNets.build(
            n_agents,
            num_classes,
            self._rng,
            grid=grid,
            hidden=hidden,
            embed_dim=embed_dim,
            agent_activation=agent_activation,
        )
        self.buffer = ReplayBuffer(cfg.replay_capacity)

    @property
    def n_agents(self) -> int:
        return self.nets.n_agents

    def epsilon(self, round_index: int) -> float:
        return epsilon_at(self.cfg, round_index)

    def select_actions(self, state: GlobalState, epsilon: float):
        return select_actions(self.nets, state, epsilon, self._rng)

    def push(self, transition: Transition) -> None:
        self.buffer.push(transition)

    def train_step(self) -> float | None:
        """One TD update on a replay sample, if the buffer can fill a batch."""
        if len(self.buffer) < self.cfg.batch_size:
            return None
        batch = self.buffer.sample(self._rng, self.cfg.batch_size)
        return td_update(self.nets, batch, self.cfg)

    def controller_round(self, prev_state, prev_actions, reward_value, new_state, round_index):
        """Advance the controller by one federation round.

        Round 0 returns the lowest grid level for every agent and touches
        nothing else.  Later rounds push the completed transition (skipped
        when there is no prior selection state yet), run one TD update once
        the buffer covers a batch, decay epsilon, and pick the next joint
        action from `new_state`.  Returns (level indices, mu values).
        """
        if round_index < 0:
            raise ConfigurationError("round_index must be >= 0")
        if round_index == 0:
            indices = np.zeros(self.n_agents, dtype=np.int64)
            return indices, self.nets.grid.as_array()[indices]
        if prev_state is not None:
            if prev_actions is None or reward_value is None:
                raise ConfigurationError("completed transitions need actions and a reward")
            self.push(
                Transition(
                    state=prev_state,
                    actions=np.asarray(prev_actions, dtype=np.int64),
                    reward=float(reward_value),
                    next_state=new_state,
                    done=False,
                )
            )
        self.train_step()
        return self.select_actions(new_state, self.epsilon(round_index))

    # -- checkpointing ----------------------------------------------------

    def state_dict(self) -> dict:
        nets = self.nets
        return {
            "version": CHECKPOINT_VERSION,
            "cfg": self.cfg.__dict__.copy(),
            "grid_levels": list(nets.grid.levels),
            "num_classes": nets.num_classes,
            "agent_layer_sizes": list(nets.agent_layer_sizes),
            "agent_activation": nets.agent_activation,
            "mixer_embed_dim": nets.mixer.embed_dim,
            "agent_params": [p.tolist() for p in nets.agent_params],
            "target_agent_params": [p.tolist() for p in nets.target_agent_params],
            "mixer": _mixer_to_lists(nets.mixer),
            "target_mixer": _mixer_to_lists(nets.target_mixer),
            "update_count": nets.update_count,
            "buffer": [_transition_to_dict(t) for t in self.buffer.items()],
            "buffer_capacity": self.buffer.capacity,
            "rng_state": self._rng.bit_generator.state,
        }

    @classmethod
    def from_state_dict(cls, data: dict) -> "QmixController":
        if data.get("version") != CHECKPOINT_VERSION:
            raise ConfigurationError(f"unsupported checkpoint version {data.get('version')}")
        cfg = RlConfig(**data["cfg"])
        controller = cls.__new__(cls)
        controller.cfg = cfg
        controller._rng = np.random.default_rng(0)
        controller._rng.bit_generator.state = data["rng_state"]
        sizes = tuple(data["agent_layer_sizes"])
        n_agents = len(data["agent_params"])
        nets = QmixNets(
            grid=ActionGrid(tuple(data["grid_levels"])),
            num_classes=data["num_classes"],
            agent_layer_sizes=sizes,
            agent_activation=data["agent_activation"],
            agent_params=[np.array(p) for p in data["agent_params"]],
            mixer=_mixer_from_lists(data["mixer"], n_agents, data["mixer_embed_dim"]),
            target_agent_params=[np.array(p) for p in data["target_agent_params"]],
            target_mixer=_mixer_from_lists(data["target_mixer"], n_agents, data["mixer_embed_dim"]),
            update_count=data["update_count"],
        )
        controller.nets = nets
        controller.buffer = ReplayBuffer(data["buffer_capacity"])
        for item in data["buffer"]:
            controller.buffer.push(_transition_from_dict(item))
        return controller


def _mixer_to_lists(mixer: MixerParams) -> dict:
    return {
        "state_dim": mixer.state_dim,
        "hyper_w1": mixer.hyper_w1.tolist(),
        "hyper_b1": mixer.hyper_b1.tolist(),
        "hyper_w2": mixer.hyper_w2.tolist(),
        "hyper_b2": mixer.hyper_b2.tolist(),
    }


def _mixer_from_lists(data: dict, n_agents: int, embed_dim: int) -> MixerParams:
    return MixerParams(
        n_agents=n_agents,
        state_dim=data["state_dim"],
        embed_dim=embed_dim,
        hyper_w1=np.array(data["hyper_w1"]),
        hyper_b1=np.array(data["hyper_b1"]),
        hyper_w2=np.array(data["hyper_w2"]),
        hyper_b2=np.array(data["hyper_b2"]),
    )


def _transition_to_dict(t: Transition) -> dict:
    return {
        "state": [c.as_vector().tolist() for c in t.state.clients],
        "actions": np.asarray(t.actions).tolist(),
        "reward": t.reward,
        "next_state": [c.as_vector().tolist() for c in t.next_state.clients],
        "done": t.done,
    }


def _transition_from_dict(data: dict) -> Transition:
    return Transition(
        state=GlobalState([ClientState(*row) for row in data["state"]]),
        actions=np.array(data["actions"], dtype=np.int64),
        reward=float(data["reward"]),
        next_state=GlobalState([ClientState(*row) for row in data["next_state"]]),
        done=bool(data["done"]),
    )


def save_checkpoint(controller: QmixController, path, extra: dict | None = None) -> None:
    """Versioned JSON dump of the controller plus caller-supplied extras."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "controller": controller.state_dict(),
        "extra": extra or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path):
    """Restore (controller, extra) from `save_checkpoint` output."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {payload.get('version')}")
    return QmixController.from_state_dict(payload["controller"]), payload.get("extra", {})
