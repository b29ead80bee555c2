"""Experiment configuration: sectioned key=value files, presets and provenance.

Keys are field names of the config dataclasses. A unit suffix converts to SI
on load, e.g. ``noise_power_dbm = -96`` or ``capacity_mb = 3``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import subprocess
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from .agent import AgentConfig
from .channel import ChannelParams, dbm_to_watts
from .compute import ComputeParams
from .env import EnvConfig
from .errors import ParseError, ValidationError

BITS_PER_MB = 8e6

UNIT_SUFFIXES = {
    "_dbm": dbm_to_watts,
    "_mhz": lambda v: v * 1e6,
    "_ghz": lambda v: v * 1e9,
    "_mb": lambda v: v * BITS_PER_MB,
    "_mcycles": lambda v: v * 1e6,
}

# energy conversion coefficients for local (UAV) and edge processing
KAPPA_PRESETS = {
    "tabulated": (1e-16, 1e-22),
    # rescaled so a 1e8-cycle task costs about 1 J on a UAV and fits the battery
    "consistent": (1e-27, 1e-28),
}

SWEEP_DEVICES = (3, 7, 10)
SWEEP_POLICIES = ("random", "ddqn_no_mask", "ddqn_with_mask")

# Fields whose defaults were chosen here rather than taken from the parameter tables.
INVENTED = {
    "channel": ("a", "b", "eta_los", "eta_nlos", "m2q_los_weighted", "speed_of_light"),
    "compute": ("t_a", "alpha", "beta", "charge_first_hop_on_offload"),
    "env": ("delay_threshold", "min_secrecy", "e_max_trans_device", "e_max_trans_uav", "e_max_proc_uav",
            "e_max_proc_edge", "slots_per_episode", "violation_penalty", "penalized", "knapsack_gates_mask",
            "resample_topology", "topology_seed", "mec_position"),
    "agent": ("target_sync", "eps_start", "eps_end", "eps_decay_fraction", "mode", "normalize_rewards",
              "moving_avg_window"),
    "run": ("preset", "topology_seed", "sweep_episodes", "eval_episodes"),
}


@dataclass(frozen=True)
class RunConfig:
    seeds: tuple[int, ...] = (0, 1, 2)
    out_dir: str = "runs"
    preset: str = "tabulated"
    topology_seed: Optional[int] = None
    sweep_devices: tuple[int, ...] = SWEEP_DEVICES
    sweep_episodes: int = 300
    eval_episodes: int = 20
    gap_slots: int = 100

    def validate(self):
        checks = [("seeds", len(self.seeds) >= 1), ("preset", self.preset in KAPPA_PRESETS),
                  ("sweep_devices", len(self.sweep_devices) >= 1 and min(self.sweep_devices) >= 1),
                  ("sweep_episodes", self.sweep_episodes >= 1), ("eval_episodes", self.eval_episodes >= 1),
                  ("gap_slots", self.gap_slots >= 1)]
        for name, ok in checks:
            if not ok:
                raise ValidationError(name, f"invalid value {getattr(self, name)!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def validate(self):
        self.env.validate()
        self.agent.validate()
        self.run.validate()
        return self

    def env_for(self, seed: int, n_devices: Optional[int] = None) -> EnvConfig:
        topo = self.run.topology_seed if self.run.topology_seed is not None else self.env.topology_seed
        return replace(self.env, seed=seed, topology_seed=topo,
                       n_devices=self.env.n_devices if n_devices is None else n_devices)


def apply_preset(cfg: ExperimentConfig, preset: str) -> ExperimentConfig:
    if preset not in KAPPA_PRESETS:
        raise ValidationError("preset", f"unknown preset {preset!r}")
    k_loc, k_edg = KAPPA_PRESETS[preset]
    compute = replace(cfg.env.compute, kappa_loc=k_loc, kappa_edg=k_edg)
    return replace(cfg, env=replace(cfg.env, compute=compute), run=replace(cfg.run, preset=preset))


def _coerce(raw: str, template: Any, name: str):
    text = raw.strip()
    try:
        if isinstance(template, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(template, int):
            return int(text)
        if isinstance(template, float):
            return float(text)
        if isinstance(template, str):
            return text
        if isinstance(template, tuple) or template is None:
            parts = [p for p in text.replace(",", " ").split() if p]
            if template is None and name in ("topology_seed",):
                return None if text.lower() in ("", "none") else int(text)
            if template is None:
                return None if text.lower() in ("", "none") else tuple(float(p) for p in parts)
            kind = type(template[0]) if template else float
            if kind is str:
                return tuple(parts)
            return tuple(kind(p) for p in parts)
    except ValueError as exc:
        raise ParseError(f"{name}: cannot parse {raw!r}") from exc
    raise ParseError(f"{name}: unsupported field type")


def _update(obj, section: str, items: dict[str, str]):
    known = {f.name: getattr(obj, f.name) for f in fields(obj) if not dataclasses.is_dataclass(getattr(obj, f.name))}
    changes = {}
    for key, raw in items.items():
        name, convert = key, None
        for suffix, fn in UNIT_SUFFIXES.items():
            if key.endswith(suffix) and key[: -len(suffix)] in known:
                name, convert = key[: -len(suffix)], fn
                break
        if name not in known:
            raise ValidationError(key, f"unknown key in [{section}]")
        value = _coerce(raw, known[name], name)
        if convert is not None:
            value = convert(float(value))
        changes[name] = value
    return replace(obj, **changes)


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(Path(path).read_text(), source=str(path))
    except configparser.Error as exc:
        raise ParseError(str(exc)) from exc
    sections = {name: dict(parser[name]) for name in parser.sections()}
    unknown = set(sections) - {"env", "channel", "compute", "agent", "run"}
    if unknown:
        raise ValidationError(sorted(unknown)[0], "unknown section")

    run = _update(RunConfig(), "run", sections.get("run", {}))
    cfg = apply_preset(ExperimentConfig(run=run), run.preset)
    channel = _update(cfg.env.channel, "channel", sections.get("channel", {}))
    compute = _update(cfg.env.compute, "compute", sections.get("compute", {}))
    env = _update(replace(cfg.env, channel=channel, compute=compute), "env", sections.get("env", {}))
    agent = _update(cfg.agent, "agent", sections.get("agent", {}))
    return ExperimentConfig(env, agent, run).validate()


def to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_hash(cfg: ExperimentConfig) -> str:
    """Digest of everything that shapes results; output location and seed list are left out."""
    data = to_dict(cfg)
    del data["run"]["out_dir"], data["run"]["seeds"]
    blob = json.dumps(data, sort_keys=True, default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def git_commit(cwd=None) -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], cwd=cwd, capture_output=True, text=True, check=True)
        return out.stdout.strip()
    except (OSError, subprocess.CalledProcessError):
        return "unknown"


def manifest_text(cfg: ExperimentConfig, command: str, seeds) -> str:
    """Provenance: hash, seeds, commit and every field, with invented defaults marked."""
    lines = [f"command {command}", f"config_hash {config_hash(cfg)}",
             "seeds " + " ".join(str(s) for s in seeds), f"commit {git_commit(Path(__file__).parent)}"]
    groups = {"channel": cfg.env.channel, "compute": cfg.env.compute, "env": cfg.env,
              "agent": cfg.agent, "run": cfg.run}
    for section, obj in groups.items():
        for f in fields(obj):
            value = getattr(obj, f.name)
            if dataclasses.is_dataclass(value):
                continue
            tag = " invented" if f.name in INVENTED.get(section, ()) else ""
            lines.append(f"{section}.{f.name} = {value!r}{tag}")
    return "\n".join(lines) + "\n"


def reference_page() -> str:
    """Documented defaults for every configurable key."""
    cfg = ExperimentConfig()
    return manifest_text(cfg, "defaults", cfg.run.seeds)
