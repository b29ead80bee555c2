"""Per-slot cost of the trained masked DDQN against the enumerated optimum on a 2-UAV instance."""

from _common import base_parser, setup
from secure_offload import experiments as ex


def main():
    parser = base_parser(__doc__, 300)
    parser.add_argument("--slots", type=int, default=100)
    args = parser.parse_args()
    log = setup(args)
    report = ex.gap_experiment(args.seed, args.episodes, args.slots)
    report.write_csv(args.out / "gap.csv")
    for seed in args.seed:
        ratios = [r.ratio for r in report.rows if r.seed == seed]
        log.info("seed %d: gap %.4f", seed, sum(ratios) / len(ratios))
    log.info("mean gap %.4f", report.mean_ratio)


if __name__ == "__main__":
    main()
