"""Acceptance suite: one test per criterion, each recording a pass/fail line.

The training-based criteria (5, 7 to 11) are marked slow; the whole module takes
well over an hour on one CPU. Deselect with ``-m "not slow"``.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

import reference as ref
from conftest import ACCEPTANCE, consistent_env
from gradcheck import max_relative_error, random_case
from secure_offload import channel as ch
from secure_offload import compute as cp
from secure_offload import experiments as ex
from secure_offload.cli import main as cli_main
from secure_offload.compute import Task
from secure_offload.env import OffloadEnv
from secure_offload.knapsack import select_local_candidates
from secure_offload.oracle import cost_recompute, decisions_from_joint, knapsack_exhaustive

SWEEP_EPISODES = 100


def record(number: int, ok: bool, detail: str):
    ACCEPTANCE[number] = (bool(ok), detail)
    assert ok, f"criterion {number}: {detail}"


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# ---------------------------------------------------------------- shared long runs

@pytest.fixture(scope="module")
def ranking():
    return ex.ranking_runs(ex.base_config())


# ---------------------------------------------------------------- 1, 2

def _random_point(rng, airborne):
    return (float(rng.uniform(0, 100)), float(rng.uniform(0, 100)),
            float(rng.uniform(1, 100)) if airborne else 0.0)


def _params(rng):
    a, b = float(rng.uniform(5, 15)), float(rng.uniform(0.1, 0.6))
    eta1 = float(rng.uniform(1, 3))
    return ch.ChannelParams(carrier_freq=float(rng.uniform(1e9, 6e9)), bandwidth=float(rng.uniform(1e6, 4e7)),
                            path_loss_exp=float(rng.uniform(2, 4)), a=a, b=b, eta_los=eta1,
                            eta_nlos=eta1 + float(rng.uniform(0, 20)),
                            p_device=float(rng.uniform(0.01, 0.5)), p_uav=float(rng.uniform(0.05, 1.0)),
                            noise_power=float(rng.uniform(1e-13, 1e-11)))


def _prm(p, power):
    return dict(a=p.a, b=p.b, eta1=p.eta_los, eta2=p.eta_nlos, fc=p.carrier_freq, iota=p.path_loss_exp,
                bw=p.bandwidth, p=power, n0=p.noise_power)


def test_criterion_1_formula_oracle():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(10_000):
        p = _params(rng)
        dev, uav, tgt, eve = (_random_point(rng, False), _random_point(rng, True),
                              _random_point(rng, True), _random_point(rng, True))
        share = int(rng.integers(1, 11))
        got = ch.n2m_link(dev, uav, eve, share, p)
        want = ref.ground_link(dev, uav, eve, share, _prm(p, p.p_device))
        pairs = [(got.legit_rate, want[0]), (got.eve_rate, want[1])]
        if want[2] > 1e-6 * want[0]:
            pairs.append((got.secrecy_rate, want[2]))
        if math.dist(uav, tgt) > 0 and math.dist(uav, eve) > 0:
            got = ch.m2q_link(uav, tgt, eve, share, p)
            want = ref.air_link(uav, tgt, eve, share, _prm(p, p.p_uav))
            pairs += [(got.legit_rate, want[0]), (got.eve_rate, want[1])]
            if want[2] > 1e-6 * want[0]:
                pairs.append((got.secrecy_rate, want[2]))
        theta = float(rng.uniform(0, 90))
        pairs.append((ch.los_probability(theta, p), ref.p_los(theta, p.a, p.b)))
        pairs.append((ch.propagation_constant(p.carrier_freq), ref.k0(p.carrier_freq)))

        size, secrecy = float(rng.uniform(1e5, 1e8)), float(rng.uniform(1e5, 1e8))
        t = ch.secure_tx_time(size, secrecy)
        pairs += [(t, size / secrecy), (ch.tx_energy(p.p_uav, t), p.p_uav * size / secrecy)]

        cycles, freq, kappa = float(rng.uniform(1e7, 1e9)), float(rng.uniform(1e7, 1e9)), float(rng.uniform(1e-28, 1e-16))
        t_c, e_c = cp.compute_time(cycles, freq), cp.compute_energy(kappa, freq, cycles)
        pairs += [(t_c, cycles / freq), (e_c, kappa * freq * freq * cycles)]
        local = bool(rng.integers(0, 2))
        t_ns, e_ns, t_ms, e_ms = (float(v) for v in rng.uniform(1e-3, 10, size=4))
        params = cp.ComputeParams(t_a=float(rng.uniform(0, 0.1)), alpha=float(rng.uniform(0, 1)),
                                  beta=float(rng.uniform(0.01, 1)))
        task = Task(0, 0, size, float(rng.uniform(0.1, 1)), cycles)
        out = cp.task_totals(task, int(local), int(not local), params, t_ns=t_ns, e_ns=e_ns, compute_t=t_c,
                             compute_e=e_c, t_ms=t_ms, e_ms=e_ms)
        d, e = ref.totals(local, t_ns, e_ns, t_ms, e_ms, params.t_a, cycles, freq, kappa)
        cost = task.priority * (params.alpha * d + params.beta * e)
        pairs += [(out.total_delay, d), (out.total_energy, e), (out.weighted_cost, cost)]
        worst = max(worst, max(rel(a, b) for a, b in pairs))
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-12 and elapsed < 5, f"max rel err {worst:.2e} over 1e4 inputs in {elapsed:.2f}s")


def test_criterion_2_spot_values():
    p = ch.ChannelParams()
    los = ch.los_probability(11.25, p)
    k0 = ch.propagation_constant(2.4e9)
    t = cp.compute_time(1e8, 5e8)
    ok = (los == 1 / 12.25 and los == ref.p_los(11.25, p.a, p.b)
          and abs(k0 - 100.53) <= 1e-2 and rel(k0, ref.k0(2.4e9)) <= 1e-15
          and t == 0.2 and t == 1e8 / 5e8)
    record(2, ok, f"p_LoS(11.25)={los!r} K0={k0:.4f} t={t!r}")


# ---------------------------------------------------------------- 3, 4

class _Item:
    def __init__(self, size, priority):
        self.data_size, self.priority = size, priority


def test_criterion_3_knapsack_exact():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    mismatches = overweight = 0
    for _ in range(500):
        n = int(rng.integers(0, 16))
        items = [_Item(float(rng.uniform(0.5, 8)) * 8e6, float(rng.choice([0.2, 0.4, 0.6, 0.8, 1.0])))
                 for _ in range(n)]
        capacity = float(rng.uniform(0, 1.2)) * sum(it.data_size for it in items) if n else 1e6
        dp, ex_ = select_local_candidates(items, capacity), knapsack_exhaustive(items, capacity)
        if dp.total_value != ex_.total_value:
            mismatches += 1
        if dp.total_weight > capacity:
            overweight += 1
    elapsed = time.perf_counter() - start
    record(3, mismatches == 0 and overweight == 0 and elapsed < 10,
           f"{mismatches} value mismatches, {overweight} overweight of 500 in {elapsed:.2f}s")


def test_criterion_4_gradient_check():
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    worst = max(max_relative_error(*random_case(rng, members=int(rng.integers(1, 3)))) for _ in range(20))
    elapsed = time.perf_counter() - start
    record(4, worst <= 1e-4 and elapsed < 30, f"max rel err {worst:.2e} over 20 nets in {elapsed:.2f}s")


# ---------------------------------------------------------------- 6

def test_criterion_6_reward_equals_recompute():
    rng = np.random.default_rng(6)
    start = time.perf_counter()
    worst, pairs = 0.0, 0
    while pairs < 1000:
        seed = int(rng.integers(0, 2 ** 31))
        env = OffloadEnv(consistent_env(seed=seed, n_devices=int(rng.integers(1, 13)),
                                        n_uavs=int(rng.integers(1, 5)), n_task_types=int(rng.integers(1, 4))))
        env.reset(seed)
        for _ in range(10):
            snap = env.snapshot()
            joint = [int(a) for a in rng.integers(0, snap.config.n_actions, size=len(snap.tasks))]
            out, _ = env.step(joint, fallback_masked=True)
            xs, ys = decisions_from_joint(snap, out.executed)
            cost = cost_recompute(xs, ys, snap, masked_conversions=out.violations["masked"])
            worst = max(worst, rel(abs(out.global_reward), cost) if cost else abs(out.global_reward))
            pairs += 1
            if out.done:
                break
    elapsed = time.perf_counter() - start
    record(6, worst <= 1e-9 and elapsed < 10, f"max rel err {worst:.2e} over {pairs} pairs in {elapsed:.2f}s")


# ---------------------------------------------------------------- 7

@pytest.mark.slow
def test_criterion_7_optimality_gap():
    start = time.perf_counter()
    report = ex.gap_experiment(seeds=(0, 1, 2), episodes=300, slots=100)
    elapsed = time.perf_counter() - start
    gap = report.mean_ratio
    record(7, gap <= 1.10 and len(report.rows) == 300,
           f"gap {gap:.4f} over {len(report.rows)} slots in {elapsed / 60:.1f} min")


# ---------------------------------------------------------------- 5, 8

@pytest.mark.slow
def test_criterion_5_mask_safety(ranking):
    # train() also raises on any executed masked action when masking is on
    runs = [r for r in ranking if r.policy == "ddqn_with_mask"]
    cfg = ex.base_config().env_for(0)
    executed = sum(r.result.masked_executed for r in runs)
    episodes = min(len(r.result.metrics) for r in runs)
    shape_ok = (cfg.n_uavs, cfg.n_task_types, cfg.n_devices) == (4, 3, 10)
    record(5, executed == 0 and episodes >= 200 and shape_ok,
           f"{executed} masked actions executed over {len(runs)} runs of {episodes} episodes")


@pytest.mark.slow
def test_criterion_8_ranking(ranking):
    s = ex.summarize_ranking(ranking)
    detail = (f"AM {s.means['ddqn_with_mask']:.1f} (sd {s.stds['ddqn_with_mask']:.1f}), "
              f"noAM {s.means['ddqn_no_mask']:.1f} (sd {s.stds['ddqn_no_mask']:.1f}), "
              f"random {s.means['random']:.1f}; margin {s.margin:.1f}")
    record(8, s.ordered and s.margin_exceeds_spread, detail)


# ---------------------------------------------------------------- 9

@pytest.mark.slow
def test_criterion_9_load_trend():
    _, cells = ex.load_sweep(ex.base_config(episodes=SWEEP_EPISODES), episodes=SWEEP_EPISODES)
    bad = []
    for policy in ex.RANKING_POLICIES:
        row = sorted((c for c in cells if c.policy == policy), key=lambda c: c.n_devices)
        for key in ("total_delay_s", "total_energy_J"):
            series = [getattr(c, key) for c in row]
            if not ex.strictly_increasing(series):
                bad.append(f"{policy} {key} {[round(v, 2) for v in series]}")
    record(9, not bad, "delay and energy increase with N for all policies" if not bad else "; ".join(bad))


# ---------------------------------------------------------------- 10

@pytest.mark.slow
def test_criterion_10_hyperparameter_robustness(ranking):
    cfg = ex.base_config()
    reuse = {(cfg.agent.gamma, cfg.agent.batch_size): next(
        r.result for r in ranking if r.policy == "ddqn_with_mask" and r.seed == 0)}
    cells = ex.robustness_runs(cfg, seed=0, reuse=reuse)
    finals = {k: ex.final_decile_mean(v) for k, v in cells.items()}
    slopes = {k: ex.final_decile_slope(v) for k, v in cells.items()}
    spread = ex.relative_spread(finals.values())
    flat = [k for k, s in slopes.items() if s < 0]
    detail = (f"relative spread {spread:.4f}; "
              + ", ".join(f"g{g}/b{b}: {finals[(g, b)]:.1f} slope {slopes[(g, b)]:+.2f}" for g, b in finals))
    record(10, spread <= 0.10 and not flat, detail)


# ---------------------------------------------------------------- 11

@pytest.mark.slow
def test_criterion_11_determinism(tmp_path):
    texts = []
    for run in ("a", "b"):
        out = tmp_path / run
        code = cli_main(["train", "--preset", "consistent", "--seed", "3", "--episodes", "20",
                         "--out", str(out)])
        assert code == 0
        texts.append(((out / "metrics.csv").read_bytes(), (out / "seed3" / "metrics.csv").read_bytes()))
    record(11, texts[0] == texts[1] and len(texts[0][0]) > 0,
           f"metrics CSVs {'identical' if texts[0] == texts[1] else 'differ'} across two runs")
