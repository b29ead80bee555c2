"""Multi-agent DDQN with action masking, coordination mini-batches and greedy execution."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import nn
from .env import EnvConfig, OffloadEnv
from .errors import EmptyMask, GroupSizeMismatch, InsufficientData, ValidationError

EVAL_SEED_OFFSET = 1_000_003


@dataclass(frozen=True)
class AgentConfig:
    hidden: tuple[int, ...] = (32, 64, 128)
    lr: float = 1e-4
    gamma: float = 0.9
    batch_size: int = 300
    buffer_capacity: int = 10_000
    episodes: int = 1000
    target_sync: int = 100
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.5
    mode: str = "double"                 # or "target_max"
    use_mask: bool = True
    policy: str = "ddqn"                 # or "random"
    random_respects_mask: bool = True
    share_parameters: bool = False
    updates_enabled: bool = True
    normalize_rewards: bool = True
    moving_avg_window: int = 0           # 0 selects a tenth of the episodes

    def validate(self):
        checks = [
            ("hidden", len(self.hidden) >= 1 and all(h >= 1 for h in self.hidden)),
            ("lr", self.lr > 0), ("gamma", 0 <= self.gamma < 1),
            ("batch_size", self.batch_size >= 1), ("buffer_capacity", self.buffer_capacity >= self.batch_size),
            ("episodes", self.episodes >= 1), ("target_sync", self.target_sync >= 1),
            ("eps_start", 0 <= self.eps_start <= 1), ("eps_end", 0 <= self.eps_end <= self.eps_start),
            ("eps_decay_fraction", 0 < self.eps_decay_fraction <= 1),
            ("mode", self.mode in ("double", "target_max")),
            ("policy", self.policy in ("ddqn", "random")),
            ("moving_avg_window", self.moving_avg_window >= 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ValidationError(name, f"invalid value {getattr(self, name)!r}")
        return self

    @property
    def window(self) -> int:
        return self.moving_avg_window or max(1, self.episodes // 10)


def epsilon_at(episode: int, cfg: AgentConfig) -> float:
    """Linear decay to the floor over the first ``eps_decay_fraction`` of episodes."""
    horizon = max(1, int(round(cfg.eps_decay_fraction * cfg.episodes)))
    frac = min(1.0, episode / horizon)
    return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)


# ---------------------------------------------------------------- action selection

def masked_argmax(q: np.ndarray, mask: Sequence[bool]) -> int:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("no feasible action")
    return int(np.argmax(np.where(mask, q, -np.inf)))   # first maximum on ties


def choose(q: np.ndarray, mask: Sequence[bool], epsilon: float, rng: np.random.Generator) -> int:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("no feasible action")
    if rng.random() < epsilon:
        return int(rng.choice(np.flatnonzero(mask)))
    return masked_argmax(q, mask)


def select_action(net: nn.QNetwork, features, mask, epsilon: float, rng: np.random.Generator) -> int:
    return choose(nn.forward(net, features), mask, epsilon, rng)


# ---------------------------------------------------------------- replay

@dataclass
class Experience:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    mask: np.ndarray
    next_mask: np.ndarray
    terminal: bool


@dataclass
class CoMBatch:
    """Whole timestep groups; arrays are laid out (group, uav, ...)."""
    indices: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    masks: np.ndarray
    next_masks: np.ndarray
    terminals: np.ndarray

    def groups(self) -> list[list[Experience]]:
        out = []
        for g in range(len(self.indices)):
            out.append([Experience(self.states[g, m], int(self.actions[g, m]), float(self.rewards[g]),
                                   self.next_states[g, m], self.masks[g, m], self.next_masks[g, m],
                                   bool(self.terminals[g])) for m in range(self.states.shape[1])])
        return out


class ReplayBuffer:
    """Ring of per-slot groups, one experience per UAV in each group."""

    def __init__(self, capacity: int, n_agents: int, state_dim: int, n_actions: int):
        self.capacity = capacity
        self.n_agents = n_agents
        self.states = np.zeros((capacity, n_agents, state_dim))
        self.next_states = np.zeros((capacity, n_agents, state_dim))
        self.actions = np.zeros((capacity, n_agents), dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.masks = np.zeros((capacity, n_agents, n_actions), dtype=bool)
        self.next_masks = np.zeros((capacity, n_agents, n_actions), dtype=bool)
        self.terminals = np.zeros(capacity, dtype=bool)
        self._next = 0
        self.size = 0

    def __len__(self):
        return self.size

    def store(self, experiences: Sequence[Experience]):
        if len(experiences) != self.n_agents:
            raise GroupSizeMismatch(f"expected {self.n_agents} experiences, got {len(experiences)}")
        i = self._next
        for m, e in enumerate(experiences):
            self.states[i, m] = e.state
            self.next_states[i, m] = e.next_state
            self.actions[i, m] = e.action
            self.masks[i, m] = e.mask
            self.next_masks[i, m] = e.next_mask
        self.rewards[i] = experiences[0].reward
        self.terminals[i] = experiences[0].terminal
        self._advance()

    def store_arrays(self, states, actions, reward, next_states, masks, next_masks, terminal):
        i = self._next
        self.states[i] = states
        self.actions[i] = actions
        self.rewards[i] = reward
        self.next_states[i] = next_states
        self.masks[i] = masks
        self.next_masks[i] = next_masks
        self.terminals[i] = terminal
        self._advance()

    def _advance(self):
        self._next = (self._next + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _ordered(self) -> np.ndarray:
        """Physical slots from oldest to newest."""
        start = self._next if self.size == self.capacity else 0
        return (start + np.arange(self.size)) % self.capacity

    def group(self, i: int) -> list[Experience]:
        """The i-th oldest stored group."""
        return self._batch(self._ordered()[[i]]).groups()[0]

    def _batch(self, idx: np.ndarray) -> CoMBatch:
        return CoMBatch(idx, self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx],
                        self.masks[idx], self.next_masks[idx], self.terminals[idx])

    def sample_com(self, batch_size: int, rng: np.random.Generator) -> CoMBatch:
        if batch_size > self.size:
            raise InsufficientData(f"{self.size} groups stored, {batch_size} requested")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return self._batch(self._ordered()[idx])


# ---------------------------------------------------------------- targets

def _per_member(arr: np.ndarray, shared: bool) -> np.ndarray:
    """(group, uav, ...) -> (member, batch, ...)."""
    if shared:
        return arr.reshape((1, -1) + arr.shape[2:])
    return np.swapaxes(arr, 0, 1)


def compute_targets(batch: CoMBatch, online: nn.QNetwork, target: nn.QNetwork, gamma: float,
                    mode: str = "double", use_mask: bool = True,
                    reward_shift: float = 0.0, reward_scale: float = 1.0) -> np.ndarray:
    """TD targets laid out (member, batch) to match the network's member axis."""
    shared = online.members == 1 and batch.states.shape[1] != 1
    next_states = _per_member(batch.next_states, shared)
    next_masks = _per_member(batch.next_masks, shared)
    if not use_mask:
        next_masks = np.ones_like(next_masks)
    n_agents = batch.states.shape[1]
    rewards = (batch.rewards - reward_shift) / reward_scale
    rewards = np.repeat(rewards[:, None], n_agents, axis=1)
    terminals = np.repeat(batch.terminals[:, None], n_agents, axis=1)
    rewards = _per_member(rewards, shared)
    terminals = _per_member(terminals, shared)

    q_target = nn.forward(target, next_states)
    if mode == "double":
        q_online = nn.forward(online, next_states)
        best = np.argmax(np.where(next_masks, q_online, -np.inf), axis=-1)
        bootstrap = np.take_along_axis(q_target, best[..., None], axis=-1)[..., 0]
    elif mode == "target_max":
        bootstrap = np.max(np.where(next_masks, q_target, -np.inf), axis=-1)
    else:
        raise ValueError(f"unknown target mode {mode!r}")
    return np.where(terminals, rewards, rewards + gamma * bootstrap)


# ---------------------------------------------------------------- training

@dataclass
class EpisodeMetrics:
    episode: int
    cumulative_reward: float
    moving_avg_reward: float
    total_delay_s: float
    total_energy_J: float
    violations: int
    epsilon: float
    masked_selected: int = 0


@dataclass
class TrainResult:
    online: nn.QNetwork
    target: nn.QNetwork
    metrics: list[EpisodeMetrics]
    masked_executed: int
    updates: int
    reward_shift: float = 0.0
    reward_scale: float = 1.0
    sync_checksums: list[float] = field(default_factory=list)

    def rewards(self) -> np.ndarray:
        return np.array([m.cumulative_reward for m in self.metrics])


def _seed_stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag])


def make_networks(env_cfg: EnvConfig, cfg: AgentConfig, seed: int) -> tuple[nn.QNetwork, nn.QNetwork]:
    dims = (env_cfg.state_dim,) + tuple(cfg.hidden) + (env_cfg.n_actions,)
    members = 1 if cfg.share_parameters else env_cfg.n_uavs
    online = nn.init_network(dims, seed, members=members)
    target = online.copy()
    return online, target


def _q_all(net: nn.QNetwork, states: np.ndarray) -> np.ndarray:
    """Q-values for every UAV's state, shape (uav, actions)."""
    if net.members == 1:
        return nn.forward(net, states)
    return nn.forward(net, states[:, None, :])[:, 0, :]


def _moving_average(values: Sequence[float], window: int) -> float:
    tail = values[-window:]
    return math.fsum(tail) / len(tail)


def train(env_cfg: EnvConfig, cfg: AgentConfig, seed: int,
          progress: Optional[Callable[[EpisodeMetrics], None]] = None) -> TrainResult:
    """Centralized training with a shared replay pool (one network per UAV by default)."""
    cfg.validate()
    env = OffloadEnv(env_cfg)
    m_count, n_actions = env_cfg.n_uavs, env_cfg.n_actions
    online, target = make_networks(env_cfg, cfg, seed)
    buffer = ReplayBuffer(cfg.buffer_capacity, m_count, env_cfg.state_dim, n_actions)
    act_rng = _seed_stream(seed, 1)
    sample_rng = _seed_stream(seed, 2)
    learning = cfg.policy == "ddqn" and cfg.updates_enabled
    respect_mask = cfg.use_mask if cfg.policy == "ddqn" else cfg.random_respects_mask
    shift, scale = 0.0, 1.0
    normalized = not cfg.normalize_rewards
    updates = 0
    masked_executed = 0
    metrics: list[EpisodeMetrics] = []
    rewards_hist: list[float] = []
    checksums: list[float] = []
    full_mask = np.ones(n_actions, dtype=bool)

    for episode in range(cfg.episodes):
        eps = epsilon_at(episode, cfg) if cfg.policy == "ddqn" else 1.0
        env.reset(seed=_episode_seed(seed, episode))
        states = env.encoded()
        masks = env.mask_array()
        ep_reward = ep_delay = ep_energy = 0.0
        ep_viol = ep_masked = 0
        done = False
        while not done:
            q = _q_all(online, states) if cfg.policy == "ddqn" else None
            joint = []
            for m in range(m_count):
                allowed = masks[m] if respect_mask else full_mask
                if q is None:
                    joint.append(int(act_rng.choice(np.flatnonzero(allowed))))
                else:
                    joint.append(choose(q[m], allowed, eps, act_rng))
            chosen_masked = sum(1 for m, a in enumerate(joint) if not masks[m][a])
            if respect_mask:
                # hard check: a masked index must never reach the environment
                if chosen_masked:
                    masked_executed += chosen_masked
                    raise AssertionError(f"masked action selected: {joint}")
                out, _ = env.step(joint)
            else:
                out, _ = env.step(joint, fallback_masked=True)
            ep_masked += chosen_masked
            next_states = env.encoded()
            next_masks = env.mask_array()
            done = out.done
            terminal = env.battery_depleted
            if learning:
                buffer.store_arrays(states, joint, out.global_reward, next_states, masks, next_masks, terminal)
                if len(buffer) >= cfg.batch_size:
                    if not normalized:
                        shift, scale = _reward_stats(buffer)
                        normalized = True
                    batch = buffer.sample_com(cfg.batch_size, sample_rng)
                    y = compute_targets(batch, online, target, cfg.gamma, cfg.mode, cfg.use_mask, shift, scale)
                    shared = online.members == 1 and m_count != 1
                    nn.train_step(online, _per_member(batch.states, shared), _per_member(batch.actions, shared),
                                  y, cfg.lr)
                    updates += 1
                    if updates % cfg.target_sync == 0:
                        nn.sync_target(online, target)
                        checksums.append(target.checksum())
            ep_reward += out.global_reward
            ep_delay += out.total_delay
            ep_energy += out.total_energy
            ep_viol += sum(out.violations.values())
            states, masks = next_states, next_masks
        rewards_hist.append(ep_reward)
        row = EpisodeMetrics(episode, ep_reward, _moving_average(rewards_hist, cfg.window), ep_delay, ep_energy,
                             ep_viol, eps, ep_masked)
        metrics.append(row)
        if progress is not None:
            progress(row)
    return TrainResult(online, target, metrics, masked_executed, updates, shift, scale, checksums)


def _episode_seed(seed: int, episode: int) -> int:
    return seed * 100_003 + episode


def _reward_stats(buffer: ReplayBuffer) -> tuple[float, float]:
    r = buffer.rewards[: len(buffer)]
    std = float(np.std(r))
    return float(np.mean(r)), std if std > 1e-12 else 1.0


# ---------------------------------------------------------------- execution

@dataclass
class EvalMetrics:
    mean_reward: float
    total_delay: float          # mean per episode
    total_energy: float         # mean per episode
    violations: float           # mean per episode
    masked_selected: int
    episode_rewards: list[float]


Policy = Callable[[OffloadEnv, np.ndarray, np.ndarray], list[int]]


def greedy_policy(net: nn.QNetwork, use_mask: bool = True) -> Policy:
    def act(env, states, masks):
        q = _q_all(net, states)
        allowed = masks if use_mask else np.ones_like(masks)
        return [masked_argmax(q[m], allowed[m]) for m in range(len(masks))]
    return act


def baseline_policy(kind: str, rng: Optional[np.random.Generator] = None, respect_mask: bool = True,
                    net: Optional[nn.QNetwork] = None) -> Policy:
    """``random``: uniform over allowed actions; ``ddqn_no_mask``: greedy over all actions."""
    if kind == "random":
        rng = rng or np.random.default_rng(0)

        def act(env, states, masks):
            return [int(rng.choice(np.flatnonzero(masks[m] if respect_mask else np.ones_like(masks[m]))))
                    for m in range(len(masks))]
        return act
    if kind == "ddqn_no_mask":
        if net is None:
            raise ValueError("ddqn_no_mask needs a trained network")
        return greedy_policy(net, use_mask=False)
    raise ValueError(f"unknown baseline {kind!r}")


def run_distributed(policy: Policy, env_cfg: EnvConfig, episodes: int, seed: int = 0) -> EvalMetrics:
    """Greedy execution on local observations only; no buffer writes or updates."""
    env = OffloadEnv(env_cfg)
    rewards, delays, energies, viols = [], [], [], []
    masked = 0
    for e in range(episodes):
        env.reset(seed=EVAL_SEED_OFFSET + seed * 1000 + e)
        ep_r = ep_d = ep_e = 0.0
        ep_v = 0
        done = False
        while not done:
            masks = env.mask_array()
            joint = policy(env, env.encoded(), masks)
            masked += sum(1 for m, a in enumerate(joint) if not masks[m][a])
            out, _ = env.step(joint, fallback_masked=True)
            ep_r += out.global_reward
            ep_d += out.total_delay
            ep_e += out.total_energy
            ep_v += sum(out.violations.values())
            done = out.done
        rewards.append(ep_r)
        delays.append(ep_d)
        energies.append(ep_e)
        viols.append(ep_v)
    return EvalMetrics(float(np.mean(rewards)), float(np.mean(delays)), float(np.mean(energies)),
                       float(np.mean(viols)), masked, rewards)


# ---------------------------------------------------------------- outputs

METRIC_FIELDS = ("episode", "cumulative_reward", "moving_avg_reward", "total_delay_s", "total_energy_J",
                 "violations", "epsilon")


def write_metrics_csv(path, metrics: Sequence[EpisodeMetrics], config_hash: str = ""):
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_FIELDS)
        for m in metrics:
            writer.writerow([m.episode, repr(m.cumulative_reward), repr(m.moving_avg_reward),
                             repr(m.total_delay_s), repr(m.total_energy_J), m.violations, repr(m.epsilon)])
