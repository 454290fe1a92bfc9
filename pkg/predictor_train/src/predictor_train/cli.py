"""Command-line entry point: train on a pairs directory, write weights
and metrics."""

from __future__ import annotations

import argparse
import logging
import sys

from .train import TrainConfig, TrainDataError, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="predictor-train",
        description="Train the occupancy predictor on block pairs and "
                    "export portable weights.")
    p.add_argument("--pairs", required=True, help="directory of .in/.tar "
                   "block pairs")
    p.add_argument("--out", default="weights.net", help="output weights file")
    p.add_argument("--metrics", default="metrics.csv",
                   help="output metrics CSV")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    return p


def cli_dispatch(argv) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    cfg = TrainConfig(pairs_dir=args.pairs, out_path=args.out,
                      metrics_path=args.metrics, epochs=args.epochs,
                      batch_size=args.batch_size, lr=args.lr, seed=args.seed)
    try:
        train(cfg)
    except (TrainDataError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - report, don't crash
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))
