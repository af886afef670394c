"""Command line entry: ``fcifem-plot <plotspec.yaml>``."""

from __future__ import annotations

import argparse
import sys

import yaml

from .plots import render


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="fcifem-plot",
        description="Render figures from fcifem run outputs")
    ap.add_argument("spec", nargs="+",
                    help="YAML plot specification file(s)")
    args = ap.parse_args(argv)
    for path in args.spec:
        with open(path) as fh:
            spec = yaml.safe_load(fh)
        out, _ = render(spec)
        print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
