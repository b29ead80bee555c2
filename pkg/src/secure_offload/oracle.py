"""Exact references for small instances.

``cost_recompute`` deliberately re-derives every rate, time and energy from
node positions with its own arithmetic instead of calling the channel,
compute or env helpers, so that agreement with ``env.step`` is a real check.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .env import EnvConfig, OffloadEnv, Snapshot, action_bits, evaluate
from .errors import InstanceTooLarge, RouteConflict
from .knapsack import VALUE_TOL, bucket_capacity, bucket_weights, summarize

MAX_JOINT = 10 ** 6
MAX_KNAPSACK_ITEMS = 20


@dataclass(frozen=True)
class OracleResult:
    best_joint_action: tuple[int, ...]
    best_cost: float
    evaluated_count: int
    feasible_count: int


def joint_cost(snap: Snapshot, joint: Sequence[int]) -> float:
    """Objective plus penalties, i.e. the negated step reward."""
    return -evaluate(snap, joint).global_reward


def optimal_joint_action(snap: Snapshot) -> OracleResult:
    m_count = len(snap.tasks)
    n_actions = snap.config.n_actions
    total = n_actions ** m_count
    if total > MAX_JOINT:
        raise InstanceTooLarge(f"{total} joint actions exceed {MAX_JOINT}")
    best, best_cost, feasible = None, math.inf, 0
    # product() walks joint actions in lexicographic order, so the first minimum wins ties
    for joint in itertools.product(range(n_actions), repeat=m_count):
        if not all(snap.masks[m][a] for m, a in enumerate(joint)):
            continue
        feasible += 1
        cost = joint_cost(snap, joint)
        if cost < best_cost:
            best, best_cost = joint, cost
    return OracleResult(tuple(best), best_cost, total, feasible)


def knapsack_exhaustive(items, capacity: float):
    """Enumerate every subset under the same 1 kb conservative weight rounding as the DP."""
    n = len(items)
    if n > MAX_KNAPSACK_ITEMS:
        raise InstanceTooLarge(f"{n} items exceed {MAX_KNAPSACK_ITEMS}")
    if n == 0:
        return summarize(items, [])
    # row r encodes flags with item 0 as the most significant bit: lexicographic order
    flags = ((np.arange(2 ** n)[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1).astype(bool)
    weights = flags.astype(np.int64) @ np.asarray(bucket_weights([it.data_size for it in items]), dtype=np.int64)
    values = flags.astype(np.float64) @ np.asarray([it.priority for it in items], dtype=np.float64)
    ok = weights <= bucket_capacity(capacity)
    top = values[ok].max()
    cand = ok & (values >= top - VALUE_TOL)
    lightest = weights[cand].min()
    row = int(np.flatnonzero(cand & (weights == lightest))[0])
    return summarize(items, flags[row].tolist())


# ---------------------------------------------------------------- independent recompute

def _dist(a, b):
    return math.sqrt(sum((u - v) ** 2 for u, v in zip(a, b)))


def _rate(snap: Snapshot, tx, rx, power, share, ground_link):
    p = snap.config.channel
    d = _dist(tx, rx)
    spread = (4 * math.pi * p.carrier_freq / p.speed_of_light * d) ** p.path_loss_exp
    if ground_link:
        theta = math.degrees(math.asin(min(1.0, abs(rx[2] - tx[2]) / d)))
        plos = 1 / (1 + p.a * math.exp(-p.b * (theta - p.a)))
        loss = (p.eta_los * plos + p.eta_nlos * (1 - plos)) * spread
    else:
        loss = p.eta_los * spread
        if p.m2q_los_weighted:
            theta = math.degrees(math.asin(min(1.0, abs(rx[2] - tx[2]) / d)))
            loss *= 1 / (1 + p.a * math.exp(-p.b * (theta - p.a)))
    return p.bandwidth / share * math.log2(1 + power / loss / p.noise_power)


def _secrecy(snap, tx, rx, power, share, ground_link):
    eve = snap.topology.eve_position
    return max(_rate(snap, tx, rx, power, share, ground_link) - _rate(snap, tx, eve, power, share, ground_link), 0.0)


def _charged_time(size, secrecy, cfg: EnvConfig):
    if secrecy >= cfg.min_secrecy and secrecy > 0:
        return size / secrecy
    return size / cfg.min_secrecy if cfg.min_secrecy > 0 else cfg.delay_threshold


def decisions_from_joint(snap: Snapshot, joint: Sequence[int]):
    """Per-UAV lists of local (x) and offload (y) flags for each of its tasks."""
    k = snap.config.n_task_types
    xs, ys = [], []
    for m, a in enumerate(joint):
        bits = action_bits(a, k)
        xs.append([bits[tc.task.type_index] for tc in snap.tasks[m]])
        ys.append([1 - bits[tc.task.type_index] for tc in snap.tasks[m]])
    return xs, ys


def cost_recompute(xs, ys, snap: Snapshot, include_penalty: bool = True, masked_conversions: int = 0) -> float:
    """Objective (and, optionally, penalty terms) straight from positions and decisions."""
    cfg = snap.config
    ch, cp = cfg.channel, cfg.compute
    topo = snap.topology
    m_count = topo.n_uavs
    counts = [0] * m_count
    for m in topo.association:
        counts[m] += 1
    total = 0.0
    breaches = {"C1": 0, "C2": 0, "C3": 0, "C4": 0, "C5": 0, "C6": 0, "C7": 0, "C9": 0,
                "masked": masked_conversions}
    for m in range(m_count):
        uav = topo.uav_positions[m]
        # best secure target: MEC preferred on ties, then lowest UAV index
        best_q, best_r = m_count, _secrecy(snap, uav, topo.mec_position, ch.p_uav, m_count, False)
        for q in range(m_count):
            if q == m:
                continue
            r = _secrecy(snap, uav, topo.uav_positions[q], ch.p_uav, m_count, False)
            if r > best_r:
                best_q, best_r = q, r
        local_bits = 0.0
        for i, tc in enumerate(snap.tasks[m]):
            task = tc.task
            x, y = xs[m][i], ys[m][i]
            if x + y != 1:
                raise RouteConflict(f"UAV {m} task {i}: x={x}, y={y}")
            dev = topo.device_positions[task.device_index]
            r_ns = _secrecy(snap, dev, uav, ch.p_device, counts[m], True)
            t1 = _charged_time(task.data_size, r_ns, cfg)
            if x:
                e_proc = cp.kappa_loc * cp.f_loc ** 2 * task.cpu_cycles
                delay = t1 + cp.t_a + task.cpu_cycles / cp.f_loc
                energy = ch.p_device * t1 + e_proc
                local_bits += task.data_size
                if e_proc > cfg.e_max_proc_uav:
                    breaches["C6"] += 1
            else:
                t2 = _charged_time(task.data_size, best_r, cfg)
                f, kappa = (cp.f_edg, cp.kappa_edg) if best_q == m_count else (cp.f_loc, cp.kappa_loc)
                cap = cfg.e_max_proc_edge if best_q == m_count else cfg.e_max_proc_uav
                e_proc = kappa * f ** 2 * task.cpu_cycles
                delay = t1 + t2 + cp.t_a + task.cpu_cycles / f
                energy = ch.p_uav * t2 + e_proc
                if cp.charge_first_hop_on_offload:
                    energy += ch.p_device * t1
                if best_r < cfg.min_secrecy:
                    breaches["C3"] += 1
                if ch.p_uav * t2 > cfg.e_max_trans_uav:
                    breaches["C5"] += 1
                if e_proc > cap:
                    breaches["C7"] += 1
            if delay > cfg.delay_threshold:
                breaches["C1"] += 1
            if r_ns < cfg.min_secrecy:
                breaches["C2"] += 1
            if ch.p_device * t1 > cfg.e_max_trans_device:
                breaches["C4"] += 1
            total += task.priority * (cp.alpha * delay + cp.beta * energy)
        if local_bits > snap.capacity_free[m]:
            breaches["C9"] += 1
    if include_penalty:
        total += cfg.violation_penalty * sum(breaches.get(c, 0) for c in cfg.penalized)
    return total


# ---------------------------------------------------------------- optimality gap

@dataclass
class GapRow:
    seed: int
    slot: int
    policy_cost: float
    oracle_cost: float
    ratio: float


@dataclass
class GapReport:
    rows: list[GapRow]

    @property
    def mean_ratio(self) -> float:
        return float(np.mean([r.ratio for r in self.rows]))

    @property
    def mean_policy_cost(self) -> float:
        return float(np.mean([r.policy_cost for r in self.rows]))

    @property
    def mean_oracle_cost(self) -> float:
        return float(np.mean([r.oracle_cost for r in self.rows]))

    def write_csv(self, path, config_hash: str = ""):
        with open(path, "w", newline="") as fh:
            if config_hash:
                fh.write(f"# config_hash={config_hash}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("seed", "slot", "policy_cost", "oracle_cost", "ratio"))
            for r in self.rows:
                w.writerow((r.seed, r.slot, repr(r.policy_cost), repr(r.oracle_cost), repr(r.ratio)))


GAP_SEED_OFFSET = 2_000_029


def optimality_gap(policy: Callable[[int], Callable], env_cfgs: Callable[[int], EnvConfig],
                   seeds: Sequence[int], slots: int) -> GapReport:
    """Mean per-slot policy cost over the enumerated optimum, on identical task draws.

    ``policy(seed)`` returns a callable ``(env, states, masks) -> joint action``;
    ``env_cfgs(seed)`` gives the environment configuration for that seed.
    """
    rows = []
    for seed in seeds:
        env = OffloadEnv(env_cfgs(seed))
        act = policy(seed)
        episode = 0
        env.reset(seed=GAP_SEED_OFFSET + seed * 1000 + episode)
        for slot in range(slots):
            snap = env.snapshot()
            best = optimal_joint_action(snap)
            joint = act(env, env.encoded(), env.mask_array())
            cost = joint_cost(snap, joint)
            rows.append(GapRow(seed, slot, cost, best.best_cost,
                               cost / best.best_cost if best.best_cost > 0 else 1.0))
            out, _ = env.step(joint)
            if out.done:
                episode += 1
                env.reset(seed=GAP_SEED_OFFSET + seed * 1000 + episode)
    return GapReport(rows)


def oracle_policy(env, states, masks):
    return list(optimal_joint_action(env.snapshot()).best_joint_action)
