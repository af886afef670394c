"""Command line entry: ``fcifem run <config.yaml> [--out DIR] [...]``."""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import load_config, run


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="fcifem",
        description="Field-aligned spline FEM experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="YAML experiment configuration")
    p_run.add_argument("--out", help="output directory (overrides config)")
    p_run.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="dotted-path config override, YAML-parsed value")
    p_run.add_argument("--threads", type=int, default=None,
                       help="worker threads for assembly jobs")
    p_run.add_argument("--seed", type=int, default=None,
                       help="seed for sampled diagnostics")
    args = parser.parse_args(argv)

    cfg = load_config(args.config, args.override)
    if args.out:
        cfg.out_dir = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.seed = args.seed
    payload = run(cfg)
    json.dump({"problem": payload["problem"], "out_dir": cfg.out_dir,
               "metrics": payload.get("metrics", {})},
              sys.stdout, sort_keys=True, default=str, indent=1)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
