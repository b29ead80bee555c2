"""Small helpers shared by the experiment scripts."""

import argparse
import csv
import logging
from pathlib import Path

from secure_offload.cli import parse_seeds


def base_parser(description: str, episodes: int) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--seed", type=parse_seeds, default=(0, 1, 2), help="seed list, e.g. 0-2")
    parser.add_argument("--episodes", type=int, default=episodes)
    parser.add_argument("--out", type=Path, default=Path("runs"))
    return parser


def setup(args):
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args.out.mkdir(parents=True, exist_ok=True)
    return logging.getLogger("scripts")


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
