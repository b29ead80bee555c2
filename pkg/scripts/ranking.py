"""Reward curves of DDQN with and without action masking against the random baseline.

Writes ranking_curves.csv (one row per policy, seed and episode) and prints
the final-decile means with their across-seed standard deviation.
"""

from _common import base_parser, setup, write_rows
from secure_offload import experiments as ex


def main():
    args = base_parser(__doc__.splitlines()[0], 1000).parse_args()
    log = setup(args)
    cfg = ex.base_config(args.seed, args.episodes)
    runs = ex.ranking_runs(cfg, progress=log.info)
    rows = [(r.policy, r.seed, m.episode, repr(m.cumulative_reward), repr(m.moving_avg_reward))
            for r in runs for m in r.result.metrics]
    write_rows(args.out / "ranking_curves.csv", ("policy", "seed", "episode", "reward", "moving_avg"), rows)
    s = ex.summarize_ranking(runs)
    for policy in s.means:
        log.info("%-15s final-decile mean %.1f  sd %.1f", policy, s.means[policy], s.stds[policy])
    log.info("ordered: %s  margin %.1f exceeds spread: %s", s.ordered, s.margin, s.margin_exceeds_spread)


if __name__ == "__main__":
    main()
