"""Desk-scale experiment definitions shared by the scripts and the acceptance tests.

All of them run under the ``consistent`` energy preset on one fixed
deployment (``EXPERIMENT_TOPOLOGY``), where offloading decisions change the
per-slot cost noticeably; on many random deployments every policy coincides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .agent import AgentConfig, TrainResult, train
from .cli import gap_study, summarize_sweep, sweep_runs
from .config import ExperimentConfig, apply_preset
from .oracle import GapReport

EXPERIMENT_TOPOLOGY = 7
RANKING_POLICIES = ("ddqn_with_mask", "ddqn_no_mask", "random")


def base_config(seeds: Sequence[int] = (0, 1, 2), episodes: int = 1000,
                topology_seed: Optional[int] = EXPERIMENT_TOPOLOGY) -> ExperimentConfig:
    cfg = apply_preset(ExperimentConfig(), "consistent")
    run = replace(cfg.run, seeds=tuple(seeds), topology_seed=topology_seed)
    return replace(cfg, agent=replace(cfg.agent, episodes=episodes), run=run)


def agent_for(policy: str, agent: AgentConfig) -> AgentConfig:
    if policy == "ddqn_with_mask":
        return replace(agent, use_mask=True, policy="ddqn")
    if policy == "ddqn_no_mask":
        return replace(agent, use_mask=False, policy="ddqn")
    if policy == "random":
        return replace(agent, policy="random")
    raise ValueError(f"unknown policy {policy!r}")


def final_decile_mean(result: TrainResult) -> float:
    rewards = result.rewards()
    tail = max(1, len(rewards) // 10)
    return float(np.mean(rewards[-tail:]))


def final_decile_slope(result: TrainResult) -> float:
    """Least-squares slope of the moving-average curve over the last tenth of episodes."""
    curve = np.array([m.moving_avg_reward for m in result.metrics])
    tail = max(2, len(curve) // 10)
    y = curve[-tail:]
    return float(np.polyfit(np.arange(tail, dtype=float), y, 1)[0])


@dataclass
class RankingRun:
    policy: str
    seed: int
    result: TrainResult

    @property
    def final(self) -> float:
        return final_decile_mean(self.result)


def ranking_runs(cfg: ExperimentConfig, policies=RANKING_POLICIES,
                 progress: Optional[Callable[[str], None]] = None) -> list[RankingRun]:
    runs = []
    for policy in policies:
        for seed in cfg.run.seeds:
            res = train(cfg.env_for(seed), agent_for(policy, cfg.agent), seed)
            runs.append(RankingRun(policy, seed, res))
            if progress:
                progress(f"{policy} seed {seed}: final-decile reward {runs[-1].final:.1f}")
    return runs


@dataclass
class RankingSummary:
    means: dict[str, float]
    stds: dict[str, float]

    @property
    def margin(self) -> float:
        return self.means["ddqn_with_mask"] - self.means["ddqn_no_mask"]

    @property
    def ordered(self) -> bool:
        m = self.means
        return m["ddqn_with_mask"] > m["ddqn_no_mask"] > m["random"]

    @property
    def margin_exceeds_spread(self) -> bool:
        return self.margin > max(self.stds["ddqn_with_mask"], self.stds["ddqn_no_mask"])


def summarize_ranking(runs: Sequence[RankingRun]) -> RankingSummary:
    means, stds = {}, {}
    for policy in dict.fromkeys(r.policy for r in runs):
        finals = [r.final for r in runs if r.policy == policy]
        means[policy] = float(np.mean(finals))
        stds[policy] = float(np.std(finals, ddof=1)) if len(finals) > 1 else 0.0
    return RankingSummary(means, stds)


ROBUSTNESS_GRID = ((0.9, 150), (0.9, 300), (0.95, 150), (0.95, 300))


def robustness_runs(cfg: ExperimentConfig, seed: int = 0,
                    reuse: Optional[dict[tuple[float, int], TrainResult]] = None,
                    progress: Optional[Callable[[str], None]] = None) -> dict[tuple[float, int], TrainResult]:
    out = dict(reuse or {})
    for gamma, batch in ROBUSTNESS_GRID:
        if (gamma, batch) in out:
            continue
        agent = replace(cfg.agent, gamma=gamma, batch_size=batch)
        out[(gamma, batch)] = train(cfg.env_for(seed), agent, seed)
        if progress:
            progress(f"gamma {gamma} batch {batch}: final-decile reward {final_decile_mean(out[(gamma, batch)]):.1f}")
    return out


def relative_spread(values: Sequence[float]) -> float:
    values = list(values)
    return (max(values) - min(values)) / abs(math.fsum(values) / len(values))


def load_sweep(cfg: ExperimentConfig, episodes: int, eval_episodes: int = 10):
    run = replace(cfg.run, sweep_episodes=episodes, eval_episodes=eval_episodes)
    rows = sweep_runs(replace(cfg, run=run))
    return rows, summarize_sweep(rows)


def strictly_increasing(values: Sequence[float]) -> bool:
    return all(a < b for a, b in zip(values, values[1:]))


def gap_experiment(seeds: Sequence[int] = (0, 1, 2), episodes: int = 300, slots: int = 100) -> GapReport:
    cfg = base_config(seeds, episodes, topology_seed=None)
    return gap_study(replace(cfg, run=replace(cfg.run, gap_slots=slots)))
