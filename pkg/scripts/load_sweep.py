"""Evaluated delay and energy for 3, 7 and 10 devices under each policy."""

from dataclasses import asdict

from _common import base_parser, setup, write_rows
from secure_offload import experiments as ex


def main():
    args = base_parser(__doc__, 100).parse_args()
    log = setup(args)
    rows, cells = ex.load_sweep(ex.base_config(args.seed, args.episodes), episodes=args.episodes)
    write_rows(args.out / "sweep_runs.csv", list(rows[0]), [list(r.values()) for r in rows])
    write_rows(args.out / "sweep.csv", list(asdict(cells[0])), [list(asdict(c).values()) for c in cells])
    for policy in ex.RANKING_POLICIES:
        row = sorted((c for c in cells if c.policy == policy), key=lambda c: c.n_devices)
        log.info("%-15s delay %s  energy %s", policy, [round(c.total_delay_s, 2) for c in row],
                 [round(c.total_energy_J, 2) for c in row])


if __name__ == "__main__":
    main()
