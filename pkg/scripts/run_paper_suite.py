#!/usr/bin/env python3
"""Run every shipped experiment config (the full reproduction suite).

The heavy runs (tokamak convergence with its self-converged reference,
the filament problem with the exact-mapping comparison, the 3D Cartesian
comparison) take tens of minutes each on a laptop; use --only to cherry
pick.  Results land in runs/<name>/ next to the working directory.
"""

import argparse
import sys
import time
from pathlib import Path

from fcifem.experiments import load_config, run

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
ORDER = [
    "periodic2d_linear",
    "periodic2d_quadratic",
    "periodic2d_quadratic_ratio10",
    "cartesian_compare_2d",
    "mapping_error",
    "tokamak_convergence",
    "tokamak_filament",
    "cartesian_compare_3d",
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--only", nargs="*", help="subset of config names")
    ap.add_argument("--out", default="runs", help="output root")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    names = args.only or ORDER
    for name in names:
        cfg = load_config(CONFIG_DIR / f"{name}.yaml")
        cfg.out_dir = str(Path(args.out) / name)
        cfg.threads = args.threads
        t0 = time.time()
        print(f"== {name} ==", flush=True)
        payload = run(cfg)
        keys = sorted(payload.get("metrics", {}))
        print(f"   done in {time.time() - t0:.0f}s; metrics: {keys}",
              flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
