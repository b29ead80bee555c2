"""Multi-UAV offloading MDP: observations, combination masks, slot dynamics, reward.

Action indices encode one bit per task type: bit ``k`` set means every task of
type ``k`` collected by that UAV in the slot is processed on board; a clear
bit offloads them to the UAV's chosen target. Target indices ``0..M-1`` are
UAVs and ``M`` is the MEC server.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import channel as ch
from . import compute as cp
from .errors import MaskViolation, NoSecureTarget, ValidationError
from .knapsack import select_local_candidates
from .topology import NetworkTopology, generate_topology

CONSTRAINTS = ("C1", "C2", "C3", "C4", "C5", "C6", "C7", "C9", "masked")


@dataclass(frozen=True)
class EnvConfig:
    channel: ch.ChannelParams = field(default_factory=ch.ChannelParams)
    compute: cp.ComputeParams = field(default_factory=cp.ComputeParams)
    n_devices: int = 10
    n_uavs: int = 4
    n_task_types: int = 3
    bounds: tuple[float, float, float] = (100.0, 100.0, 100.0)
    mec_position: Optional[tuple[float, float, float]] = None
    battery_init: float = 3e4            # J
    capacity: float = 24e6               # bits (3 MB)
    delay_threshold: float = 5.0         # s
    min_secrecy: float = 1e6             # bit/s
    e_max_trans_device: float = 5.0      # J
    e_max_trans_uav: float = 20.0        # J
    e_max_proc_uav: float = 3e4          # J
    e_max_proc_edge: float = 3e4         # J
    slots_per_episode: int = 100
    data_size_mean: float = 8e6          # bits
    data_size_std: float = 8e5
    cycles_mean: float = 1e8
    cycles_std: float = 1e7
    priority_set: tuple[float, ...] = (0.3, 0.6, 0.9)
    violation_penalty: float = 100.0
    penalized: tuple[str, ...] = ("C1", "C3", "masked")
    knapsack_gates_mask: bool = False
    resample_topology: bool = False
    topology_seed: Optional[int] = None  # defaults to ``seed``
    seed: int = 0

    @property
    def n_actions(self) -> int:
        return 2 ** self.n_task_types

    @property
    def state_dim(self) -> int:
        return 2 + 3 * self.n_task_types

    def validate(self):
        self.channel.validate()
        self.compute.validate()
        checks = [
            ("n_devices", self.n_devices >= 1), ("n_uavs", self.n_uavs >= 1),
            ("n_task_types", 1 <= self.n_task_types <= 12),
            ("bounds", len(self.bounds) == 3 and all(b > 0 for b in self.bounds)),
            ("battery_init", self.battery_init > 0), ("capacity", self.capacity >= 0),
            ("delay_threshold", self.delay_threshold > 0), ("min_secrecy", self.min_secrecy >= 0),
            ("e_max_trans_device", self.e_max_trans_device > 0),
            ("e_max_trans_uav", self.e_max_trans_uav > 0),
            ("e_max_proc_uav", self.e_max_proc_uav > 0),
            ("e_max_proc_edge", self.e_max_proc_edge > 0),
            ("slots_per_episode", self.slots_per_episode >= 1),
            ("data_size_mean", self.data_size_mean > 0), ("data_size_std", self.data_size_std >= 0),
            ("cycles_mean", self.cycles_mean > 0), ("cycles_std", self.cycles_std >= 0),
            ("priority_set", len(self.priority_set) > 0 and all(p >= 0 for p in self.priority_set)),
            ("violation_penalty", self.violation_penalty >= 0),
            ("penalized", set(self.penalized) <= set(CONSTRAINTS)),
        ]
        for name, ok in checks:
            if not ok:
                raise ValidationError(name, f"invalid value {getattr(self, name)!r}")
        return self


@dataclass(frozen=True)
class LinkState:
    """Static per-episode channel quantities."""
    n2m: tuple[ch.SecrecyLink, ...]                 # per device
    m2q: tuple[dict[int, ch.SecrecyLink], ...]      # per UAV, keyed by target
    target: tuple[int, ...]                         # best-secrecy target per UAV
    secure_target: tuple[bool, ...]                 # target meets the secrecy floor


@dataclass(frozen=True)
class TaskCosts:
    task: cp.Task
    t_ns: float
    e_ns: float
    n2m_secrecy: float
    t_loc: float
    e_loc: float
    t_ms: float
    e_ms: float
    m2q_secrecy: float
    t_edg: float
    e_edg: float
    edg_cap: float


@dataclass(frozen=True)
class UavObservation:
    battery: float
    capacity_free: float
    task_features: tuple[tuple[float, float], ...]   # (total size, mean priority) per type
    knapsack_flags: tuple[bool, ...]
    mask: tuple[bool, ...]


@dataclass
class Snapshot:
    """Everything needed to evaluate a joint action for the current slot."""
    config: EnvConfig
    topology: NetworkTopology
    links: LinkState
    tasks: list[list[TaskCosts]]          # per UAV
    battery: np.ndarray
    capacity_free: np.ndarray
    masks: list[tuple[bool, ...]]
    slot: int


@dataclass
class StepOutcome:
    global_reward: float
    per_uav_cost: list[float]
    total_delay: float
    total_energy: float
    violations: dict[str, int]
    done: bool
    executed: tuple[int, ...]
    per_uav_delay: list[float]
    per_uav_energy: list[float]
    per_uav_violations: list[int]
    objective: float
    uav_energy: list[float]


@dataclass(frozen=True)
class TaskGroup:
    type_index: int
    data_size: float
    priority: float


def action_bits(index: int, k: int) -> tuple[int, ...]:
    return tuple((index >> b) & 1 for b in range(k))


# ---------------------------------------------------------------- channel state

def compute_links(topology: NetworkTopology, config: EnvConfig) -> LinkState:
    params = config.channel
    share = topology.devices_per_uav
    n2m = tuple(ch.n2m_link(dev, topology.uav_positions[m], topology.eve_position, share[m], params)
                for dev, m in zip(topology.device_positions, topology.association))
    m_count = topology.n_uavs
    m2q, targets, secure = [], [], []
    for m in range(m_count):
        links = {}
        for q in target_set(m, m_count):
            pos = topology.mec_position if q == m_count else topology.uav_positions[q]
            # bandwidth share at a target is fixed to M (worst case)
            links[q] = ch.m2q_link(topology.uav_positions[m], pos, topology.eve_position, m_count, params)
        m2q.append(links)
        q = best_target(m, links, m_count)
        targets.append(q)
        secure.append(links[q].secrecy_rate >= config.min_secrecy)
    return LinkState(n2m, tuple(m2q), tuple(targets), tuple(secure))


def target_set(uav: int, n_uavs: int) -> list[int]:
    return [q for q in range(n_uavs) if q != uav] + [n_uavs]


def best_target(uav: int, links: dict[int, ch.SecrecyLink], n_uavs: int) -> int:
    order = [n_uavs] + [q for q in range(n_uavs) if q != uav]   # MEC first, then by index
    best = order[0]
    for q in order[1:]:
        if links[q].secrecy_rate > links[best].secrecy_rate:
            best = q
    return best


def select_offload_target(uav: int, topology: NetworkTopology, config: EnvConfig,
                          links: Optional[LinkState] = None) -> int:
    """Target with the highest second-hop secrecy rate; raises if none is secure."""
    links = links or compute_links(topology, config)
    q = links.target[uav]
    if not links.secure_target[uav]:
        raise NoSecureTarget(f"UAV {uav}: best secrecy rate {links.m2q[uav][q].secrecy_rate:.3g} bit/s")
    return q


# ---------------------------------------------------------------- tasks

def _truncated_normal(rng: np.random.Generator, mean: float, std: float, n: int) -> np.ndarray:
    draws = np.clip(rng.normal(mean, std, size=n), mean - 3 * std, mean + 3 * std)
    return np.maximum(draws, mean * 1e-6)


def draw_tasks(rng: np.random.Generator, config: EnvConfig, n: int) -> list[cp.Task]:
    types = rng.integers(0, config.n_task_types, size=n)
    sizes = _truncated_normal(rng, config.data_size_mean, config.data_size_std, n)
    cycles = _truncated_normal(rng, config.cycles_mean, config.cycles_std, n)
    prio = rng.integers(0, len(config.priority_set), size=n)
    return [cp.Task(i, int(types[i]), float(sizes[i]), float(config.priority_set[prio[i]]), float(cycles[i]))
            for i in range(n)]


def sample_tasks(rng: np.random.Generator, config: EnvConfig,
                 topology: NetworkTopology) -> list[list[cp.Task]]:
    """One task per device, grouped by the device's UAV."""
    per_uav: list[list[cp.Task]] = [[] for _ in range(topology.n_uavs)]
    for task in draw_tasks(rng, config, topology.n_devices):
        per_uav[topology.association[task.device_index]].append(task)
    return per_uav


def hop_time(data_size: float, secrecy: float, config: EnvConfig) -> float:
    """Secure transmission time; a hop below the secrecy floor is charged at the floor rate."""
    if secrecy >= config.min_secrecy and secrecy > 0:
        return ch.secure_tx_time(data_size, secrecy)
    if config.min_secrecy > 0:
        return data_size / config.min_secrecy
    return config.delay_threshold


def task_costs(task: cp.Task, uav: int, links: LinkState, config: EnvConfig, n_uavs: int) -> TaskCosts:
    cparams, chp = config.compute, config.channel
    r_ns = links.n2m[task.device_index].secrecy_rate
    t_ns = hop_time(task.data_size, r_ns, config)
    q = links.target[uav]
    r_ms = links.m2q[uav][q].secrecy_rate
    t_ms = hop_time(task.data_size, r_ms, config)
    if q == n_uavs:
        f_edg, kappa_edg, edg_cap = cparams.f_edg, cparams.kappa_edg, config.e_max_proc_edge
    else:
        f_edg, kappa_edg, edg_cap = cparams.f_loc, cparams.kappa_loc, config.e_max_proc_uav
    return TaskCosts(
        task=task,
        t_ns=t_ns, e_ns=ch.tx_energy(chp.p_device, t_ns), n2m_secrecy=r_ns,
        t_loc=cp.compute_time(task.cpu_cycles, cparams.f_loc),
        e_loc=cp.compute_energy(cparams.kappa_loc, cparams.f_loc, task.cpu_cycles),
        t_ms=t_ms, e_ms=ch.tx_energy(chp.p_uav, t_ms), m2q_secrecy=r_ms,
        t_edg=cp.compute_time(task.cpu_cycles, f_edg),
        e_edg=cp.compute_energy(kappa_edg, f_edg, task.cpu_cycles),
        edg_cap=edg_cap,
    )


def group_by_type(tasks: Sequence[TaskCosts], k: int) -> list[list[TaskCosts]]:
    groups: list[list[TaskCosts]] = [[] for _ in range(k)]
    for tc in tasks:
        groups[tc.task.type_index].append(tc)
    return groups


def knapsack_flags(tasks: Sequence[TaskCosts], capacity: float, k: int) -> tuple[bool, ...]:
    groups = group_by_type(tasks, k)
    present = [i for i in range(k) if groups[i]]
    items = [TaskGroup(i, math.fsum(tc.task.data_size for tc in groups[i]),
                       math.fsum(tc.task.priority for tc in groups[i])) for i in present]
    result = select_local_candidates(items, capacity)
    flags = [False] * k
    for item, sel in zip(items, result.selected):
        flags[item.type_index] = sel
    return tuple(flags)


# ---------------------------------------------------------------- masks

def combination_feasible(bits: Sequence[int], groups: Sequence[Sequence[TaskCosts]], battery: float,
                         capacity_free: float, secure_target: bool, config: EnvConfig,
                         kflags: Optional[Sequence[bool]] = None) -> bool:
    local_size = 0.0
    energy = 0.0
    for k, group in enumerate(groups):
        if not group:
            continue
        if bits[k]:
            if kflags is not None and not kflags[k]:
                return False
            for tc in group:
                if tc.e_loc > config.e_max_proc_uav:
                    return False
                local_size += tc.task.data_size
                energy += tc.e_loc
        else:
            if not secure_target:
                return False
            for tc in group:
                if tc.e_ms > config.e_max_trans_uav or tc.e_edg > tc.edg_cap:
                    return False
                energy += tc.e_ms
    return local_size <= capacity_free and energy <= battery


def build_mask(battery: float, capacity_free: float, tasks: Sequence[TaskCosts], secure_target: bool,
               config: EnvConfig, kflags: Optional[Sequence[bool]] = None) -> tuple[bool, ...]:
    """Feasibility of each of the 2^K combinations; all-offload is the forced fallback."""
    k = config.n_task_types
    groups = group_by_type(tasks, k)
    gate = kflags if config.knapsack_gates_mask else None
    mask = [combination_feasible(action_bits(a, k), groups, battery, capacity_free, secure_target, config, gate)
            for a in range(2 ** k)]
    if not any(mask):
        mask[0] = True
    return tuple(mask)


def fallback_action(mask: Sequence[bool]) -> int:
    return 0 if mask[0] else mask.index(True)


# ---------------------------------------------------------------- evaluation

def evaluate(snap: Snapshot, joint: Sequence[int], fallback_masked: bool = False) -> StepOutcome:
    """Route every task of the slot under ``joint`` without mutating anything."""
    config = snap.config
    k = config.n_task_types
    m_count = len(snap.tasks)
    if len(joint) != m_count:
        raise ValueError(f"expected {m_count} actions, got {len(joint)}")
    viol = {c: 0 for c in CONSTRAINTS}
    per_cost, per_delay, per_energy, per_viol, uav_energy = [], [], [], [], []
    executed = []
    cparams = config.compute
    for m in range(m_count):
        a = int(joint[m])
        if not 0 <= a < config.n_actions:
            raise ValueError(f"action {a} out of range")
        before = sum(viol.values())
        if not snap.masks[m][a]:
            if not fallback_masked:
                raise MaskViolation(f"UAV {m} chose masked action {a}")
            a = fallback_action(snap.masks[m])
            viol["masked"] += 1
        executed.append(a)
        bits = action_bits(a, k)
        q = snap.links.target[m]
        cost = delay_sum = energy_sum = drained = local_size = 0.0
        for tc in snap.tasks[m]:
            task = tc.task
            if bits[task.type_index]:
                out = cp.task_totals(task, 1, 0, cparams, t_ns=tc.t_ns, e_ns=tc.e_ns,
                                     compute_t=tc.t_loc, compute_e=tc.e_loc)
                drained += tc.e_loc
                local_size += task.data_size
                if tc.e_loc > config.e_max_proc_uav:
                    viol["C6"] += 1
            else:
                out = cp.task_totals(task, 0, 1, cparams, t_ns=tc.t_ns, e_ns=tc.e_ns,
                                     compute_t=tc.t_edg, compute_e=tc.e_edg,
                                     t_ms=tc.t_ms, e_ms=tc.e_ms, target=q)
                drained += tc.e_ms
                if tc.m2q_secrecy < config.min_secrecy:
                    viol["C3"] += 1
                if tc.e_ms > config.e_max_trans_uav:
                    viol["C5"] += 1
                if tc.e_edg > tc.edg_cap:
                    viol["C7"] += 1
            if out.total_delay > config.delay_threshold:
                viol["C1"] += 1
            if tc.n2m_secrecy < config.min_secrecy:
                viol["C2"] += 1
            if tc.e_ns > config.e_max_trans_device:
                viol["C4"] += 1
            cost += out.weighted_cost
            delay_sum += out.total_delay
            energy_sum += out.total_energy
        if local_size > snap.capacity_free[m]:
            viol["C9"] += 1
        per_cost.append(cost)
        per_delay.append(delay_sum)
        per_energy.append(energy_sum)
        per_viol.append(sum(viol.values()) - before)
        uav_energy.append(drained)
    objective = math.fsum(per_cost)
    penalties = sum(viol[c] for c in config.penalized)
    reward = -objective - config.violation_penalty * penalties
    return StepOutcome(
        global_reward=reward, per_uav_cost=per_cost, total_delay=math.fsum(per_delay),
        total_energy=math.fsum(per_energy), violations=viol, done=False, executed=tuple(executed),
        per_uav_delay=per_delay, per_uav_energy=per_energy, per_uav_violations=per_viol,
        objective=objective, uav_energy=uav_energy,
    )


def encode_state(obs: UavObservation, config: EnvConfig) -> np.ndarray:
    feats = [obs.battery / config.battery_init,
             obs.capacity_free / config.capacity if config.capacity > 0 else 0.0]
    scale = 3.0 * config.data_size_mean
    for (size, prio), flag in zip(obs.task_features, obs.knapsack_flags):
        feats.extend((size / scale, prio, float(flag)))
    return np.asarray(feats, dtype=np.float64)


class OffloadEnv:
    """Single-writer environment; ``reset`` and ``step`` mutate internal state."""

    def __init__(self, config: EnvConfig, record_trace: bool = False):
        self.config = config.validate()
        self.record_trace = record_trace
        self.trace: list[dict] = []
        self._fixed_topology: Optional[NetworkTopology] = None
        self.topology: Optional[NetworkTopology] = None
        self.links: Optional[LinkState] = None
        self.episode = -1

    # -- lifecycle
    def reset(self, seed: Optional[int] = None) -> list[UavObservation]:
        cfg = self.config
        episode_seed = cfg.seed if seed is None else seed
        if cfg.resample_topology:
            topo = self._make_topology(episode_seed)
        else:
            if self._fixed_topology is None:
                self._fixed_topology = self._make_topology(
                    cfg.seed if cfg.topology_seed is None else cfg.topology_seed)
            topo = self._fixed_topology
        if topo is not self.topology:
            self.topology = topo
            self.links = compute_links(topo, cfg)
        self._rng = np.random.default_rng([cfg.seed, episode_seed, 0x7A5C])
        m = cfg.n_uavs
        self.battery = np.full(m, cfg.battery_init, dtype=np.float64)
        self.capacity_free = np.full(m, cfg.capacity, dtype=np.float64)
        self.slot = 0
        self.episode += 1
        self._new_slot()
        return self.observations()

    def use_topology(self, topology: NetworkTopology):
        """Pin a given deployment for subsequent resets."""
        if topology.n_devices != self.config.n_devices or topology.n_uavs != self.config.n_uavs:
            raise ValueError("topology size does not match configuration")
        self._fixed_topology = topology
        self.topology = None

    def _make_topology(self, seed: int) -> NetworkTopology:
        cfg = self.config
        return generate_topology(seed, cfg.n_devices, cfg.n_uavs, cfg.bounds, cfg.mec_position)

    def _new_slot(self):
        cfg = self.config
        raw = sample_tasks(self._rng, cfg, self.topology)
        self.tasks = [[task_costs(t, m, self.links, cfg, cfg.n_uavs) for t in raw[m]] for m in range(cfg.n_uavs)]
        self.capacity_free[:] = cfg.capacity   # tasks finish within their slot
        self.kflags = [knapsack_flags(self.tasks[m], self.capacity_free[m], cfg.n_task_types)
                       for m in range(cfg.n_uavs)]
        self.masks = [build_mask(self.battery[m], self.capacity_free[m], self.tasks[m],
                                 self.links.secure_target[m], cfg, self.kflags[m])
                      for m in range(cfg.n_uavs)]

    # -- views
    def observations(self) -> list[UavObservation]:
        cfg = self.config
        obs = []
        for m in range(cfg.n_uavs):
            feats = []
            for group in group_by_type(self.tasks[m], cfg.n_task_types):
                if group:
                    feats.append((math.fsum(tc.task.data_size for tc in group),
                                  math.fsum(tc.task.priority for tc in group) / len(group)))
                else:
                    feats.append((0.0, 0.0))
            obs.append(UavObservation(max(float(self.battery[m]), 0.0), float(self.capacity_free[m]),
                                      tuple(feats), self.kflags[m], self.masks[m]))
        return obs

    def encoded(self) -> np.ndarray:
        return np.stack([encode_state(o, self.config) for o in self.observations()])

    def mask_array(self) -> np.ndarray:
        return np.asarray(self.masks, dtype=bool)

    def snapshot(self) -> Snapshot:
        return Snapshot(self.config, self.topology, self.links, [list(t) for t in self.tasks],
                        self.battery.copy(), self.capacity_free.copy(), list(self.masks), self.slot)

    # -- dynamics
    def step(self, joint: Sequence[int], fallback_masked: bool = False) -> tuple[StepOutcome, list[UavObservation]]:
        out = evaluate(self.snapshot(), joint, fallback_masked)
        if self.record_trace:
            for m, a in enumerate(out.executed):
                self.trace.append({
                    "episode": self.episode, "slot": self.slot, "uav": m, "action": a,
                    "reward": out.global_reward, "delay": out.per_uav_delay[m],
                    "energy": out.per_uav_energy[m], "violations": out.per_uav_violations[m],
                })
        self.battery -= np.asarray(out.uav_energy)
        self.slot += 1
        out.done = self.slot >= self.config.slots_per_episode or bool(np.any(self.battery <= 0))
        self._new_slot()
        return out, self.observations()

    @property
    def battery_depleted(self) -> bool:
        return bool(np.any(self.battery <= 0))

    def clone(self) -> "OffloadEnv":
        return copy.deepcopy(self)


TRACE_FIELDS = ("episode", "slot", "uav", "action", "reward", "delay", "energy", "violations")


def write_trace_csv(path, rows: Sequence[dict]):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
