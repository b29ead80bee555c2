"""Command line entry point: train, eval, sweep and oracle-gap."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import nn
from .agent import (AgentConfig, EvalMetrics, TrainResult, baseline_policy, greedy_policy, run_distributed, train,
                    write_metrics_csv)
from .config import (SWEEP_POLICIES, ExperimentConfig, apply_preset, config_hash, load_config, manifest_text)
from .env import EnvConfig
from .errors import ConfigError
from .oracle import GapReport, optimality_gap

log = logging.getLogger("secure_offload")

ORACLE_TOL = 1e-9


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"0,1,2"`` or ``"0-2"`` or a mix of both."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if part[0] != "-" else ("-" + part[1:].split("-", 1)[0], part[1:].split("-", 1)[1])
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return tuple(seeds)


def _write_manifest(cfg: ExperimentConfig, out: Path, command: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(manifest_text(cfg, command, cfg.run.seeds))


# ---------------------------------------------------------------- train / eval

def train_seed(cfg: ExperimentConfig, seed: int, agent: Optional[AgentConfig] = None,
               n_devices: Optional[int] = None) -> TrainResult:
    return train(cfg.env_for(seed, n_devices), agent or cfg.agent, seed)


def run_train(cfg: ExperimentConfig) -> int:
    out = Path(cfg.run.out_dir)
    _write_manifest(cfg, out, "train")
    digest = config_hash(cfg)
    for seed in cfg.run.seeds:
        res = train_seed(cfg, seed)
        seed_dir = out / f"seed{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(seed_dir / "metrics.csv", res.metrics, digest)
        nn.save_checkpoint(res.online, seed_dir / "online.ckpt")
        nn.save_checkpoint(res.target, seed_dir / "target.ckpt")
        last = res.metrics[-1]
        log.info("seed %d: final moving-average reward %.2f over %d updates", seed, last.moving_avg_reward,
                 res.updates)
        if res.masked_executed:
            log.error("seed %d executed %d masked actions", seed, res.masked_executed)
            return 1
    # copy of the first seed's curve at the top level, as the documented output name
    first = out / f"seed{cfg.run.seeds[0]}" / "metrics.csv"
    (out / "metrics.csv").write_bytes(first.read_bytes())
    return 0


def _eval_row(policy: str, n_devices: int, seed: int, ev: EvalMetrics) -> dict:
    return {"n_devices": n_devices, "policy": policy, "seed": seed, "mean_reward": ev.mean_reward,
            "total_delay_s": ev.total_delay, "total_energy_J": ev.total_energy, "violations": ev.violations,
            "masked_selected": ev.masked_selected}


def _write_rows(path: Path, rows: Sequence[dict], digest: str):
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={digest}\n")
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def run_eval(cfg: ExperimentConfig) -> int:
    out = Path(cfg.run.out_dir)
    rows = []
    for seed in cfg.run.seeds:
        ckpt = out / f"seed{seed}" / "online.ckpt"
        if not ckpt.exists():
            log.error("missing checkpoint %s", ckpt)
            return 2
        net = nn.load_checkpoint(ckpt)
        ev = run_distributed(greedy_policy(net, cfg.agent.use_mask), cfg.env_for(seed), cfg.run.eval_episodes, seed)
        rows.append(_eval_row("ddqn_with_mask" if cfg.agent.use_mask else "ddqn_no_mask", cfg.env.n_devices,
                              seed, ev))
        print(f"seed {seed}: delay {ev.total_delay:.3f} s  energy {ev.total_energy:.3f} J  "
              f"reward {ev.mean_reward:.2f}")
    _write_rows(out / "eval.csv", rows, config_hash(cfg))
    return 0


# ---------------------------------------------------------------- sweep

@dataclass
class SweepCell:
    n_devices: int
    policy: str
    mean_reward: float
    total_delay_s: float
    total_energy_J: float
    violations: float


def sweep_runs(cfg: ExperimentConfig, devices=None, policies=SWEEP_POLICIES) -> list[dict]:
    """Train (where needed) and evaluate every N x policy x seed cell."""
    rows = []
    agent = replace(cfg.agent, episodes=cfg.run.sweep_episodes)
    for n in devices or cfg.run.sweep_devices:
        for policy in policies:
            for seed in cfg.run.seeds:
                env = cfg.env_for(seed, n)
                if policy == "random":
                    act = baseline_policy("random", np.random.default_rng([seed, 7]))
                else:
                    masked = policy == "ddqn_with_mask"
                    res = train(env, replace(agent, use_mask=masked), seed)
                    act = greedy_policy(res.online, use_mask=masked)
                ev = run_distributed(act, env, cfg.run.eval_episodes, seed)
                rows.append(_eval_row(policy, n, seed, ev))
                log.info("N=%d %s seed %d: delay %.2f energy %.2f", n, policy, seed, ev.total_delay,
                         ev.total_energy)
    return rows


def summarize_sweep(rows: Sequence[dict]) -> list[SweepCell]:
    cells = []
    keys = list(dict.fromkeys((r["n_devices"], r["policy"]) for r in rows))
    for n, policy in keys:
        sel = [r for r in rows if r["n_devices"] == n and r["policy"] == policy]
        cells.append(SweepCell(n, policy, *(float(np.mean([r[k] for r in sel]))
                                            for k in ("mean_reward", "total_delay_s", "total_energy_J",
                                                      "violations"))))
    return cells


def run_sweep(cfg: ExperimentConfig) -> int:
    out = Path(cfg.run.out_dir)
    _write_manifest(cfg, out, "sweep")
    rows = sweep_runs(cfg)
    digest = config_hash(cfg)
    _write_rows(out / "sweep_runs.csv", rows, digest)
    cells = summarize_sweep(rows)
    _write_rows(out / "sweep.csv", [vars(c) for c in cells], digest)
    for c in cells:
        print(f"N={c.n_devices:<3d} {c.policy:<15s} delay {c.total_delay_s:10.3f} s  "
              f"energy {c.total_energy_J:10.3f} J  reward {c.mean_reward:12.2f}")
    return 0


# ---------------------------------------------------------------- oracle gap

def small_instance(env: EnvConfig) -> EnvConfig:
    """Two UAVs, two task types, four devices, batteries too large to bind."""
    return replace(env, n_uavs=2, n_task_types=2, n_devices=4, battery_init=1e12)


def gap_study(cfg: ExperimentConfig) -> GapReport:
    agent = replace(cfg.agent, episodes=min(cfg.agent.episodes, 300))

    def env_cfg(seed):
        return small_instance(cfg.env_for(seed))

    def policy(seed):
        return greedy_policy(train(env_cfg(seed), agent, seed).online)

    return optimality_gap(policy, env_cfg, cfg.run.seeds, cfg.run.gap_slots)


def run_oracle_gap(cfg: ExperimentConfig) -> int:
    out = Path(cfg.run.out_dir)
    _write_manifest(cfg, out, "oracle-gap")
    report = gap_study(cfg)
    report.write_csv(out / "gap.csv", config_hash(cfg))
    print(f"mean gap {report.mean_ratio:.4f} over {len(report.rows)} slots")
    # the oracle is a lower bound on every feasible joint action
    if any(r.ratio < 1.0 - ORACLE_TOL for r in report.rows):
        log.error("policy beat the enumerated optimum; oracle or environment is inconsistent")
        return 1
    return 0


# ---------------------------------------------------------------- argument handling

COMMANDS = {"train": run_train, "eval": run_eval, "sweep": run_sweep, "oracle-gap": run_oracle_gap}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secure-offload",
                                     description="Secure multi-UAV task offloading with masked multi-agent DDQN.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="key=value config file with [env] [channel] [compute] "
                                                    "[agent] [run] sections")
    parser.add_argument("--seed", type=parse_seeds, help="seed list, e.g. 0,1,2 or 0-2")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--mode", choices=("double", "target_max"), help="bootstrap target form")
    parser.add_argument("--mask", choices=("on", "off"), help="action masking")
    parser.add_argument("--preset", choices=("tabulated", "consistent"), help="energy coefficient preset")
    parser.add_argument("--episodes", type=int, help="override the number of training episodes")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.preset:
        cfg = apply_preset(cfg, args.preset)
    run, agent = cfg.run, cfg.agent
    if args.seed:
        run = replace(run, seeds=args.seed)
    if args.out:
        run = replace(run, out_dir=args.out)
    if args.mode:
        agent = replace(agent, mode=args.mode)
    if args.mask:
        agent = replace(agent, use_mask=args.mask == "on")
    if args.episodes:
        agent = replace(agent, episodes=args.episodes)
        run = replace(run, sweep_episodes=args.episodes)
    return replace(cfg, agent=agent, run=run).validate()


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg)
    except AssertionError as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
