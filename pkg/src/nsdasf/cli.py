"""Command line entry point: ``nsdasf run [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .errors import NSDASFError
from .experiments import FULL_RUNS, ExperimentConfig, load_config, run_experiment


def build_parser():
    parser = argparse.ArgumentParser(prog="nsdasf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the static or tracking experiment")
    r.add_argument("--config", help="key = value config file")
    r.add_argument("--experiment", choices=("static", "tracking", "custom"))
    r.add_argument("--seed", type=int)
    r.add_argument("--runs", type=int)
    r.add_argument("--full", action="store_true",
                   help=f"use {FULL_RUNS} Monte-Carlo runs")
    r.add_argument("--iterations", type=int)
    r.add_argument("--mode", choices=("batch", "adaptive"))
    r.add_argument("--out", dest="output")
    r.add_argument("--cache-gamma", action="store_true", default=None)
    r.add_argument("--bytes-per-scalar", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--trace", action="store_true", default=None,
                   help="also dump message traces")
    r.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {k: getattr(args, k) for k in
                 ("experiment", "seed", "runs", "iterations", "mode", "output",
                  "cache_gamma", "bytes_per_scalar", "workers", "trace")
                 if getattr(args, k) is not None}
    if args.full:
        overrides["runs"] = FULL_RUNS
    return replace(cfg, **overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        result = run_experiment(cfg)
    except (NSDASFError, OSError) as exc:
        print(f"nsdasf: error: {exc}", file=sys.stderr)
        return 2
    for path in result["paths"]:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
