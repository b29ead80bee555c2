"""Final reward of the masked DDQN for discount factor 0.9/0.95 and batch size 150/300."""

from _common import base_parser, setup, write_rows
from secure_offload import experiments as ex


def main():
    parser = base_parser(__doc__, 1000)
    args = parser.parse_args()
    log = setup(args)
    cfg = ex.base_config(args.seed, args.episodes)
    rows = []
    for seed in args.seed:
        cells = ex.robustness_runs(cfg, seed=seed, progress=log.info)
        for (gamma, batch), res in cells.items():
            rows.append((seed, gamma, batch, repr(ex.final_decile_mean(res)), repr(ex.final_decile_slope(res))))
        spread = ex.relative_spread(ex.final_decile_mean(r) for r in cells.values())
        log.info("seed %d: relative spread %.4f", seed, spread)
    write_rows(args.out / "robustness.csv", ("seed", "gamma", "batch_size", "final_reward", "final_slope"), rows)


if __name__ == "__main__":
    main()
