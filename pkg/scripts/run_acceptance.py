"""Run every acceptance suite in criterion order and write the reports.

Prints one PASS/FAIL line per suite and exits 1 if any suite fails.

Usage:
  python scripts/run_acceptance.py [--out DIR] [--seed N] [--jobs J]
"""

import argparse
import sys

from flagforms.cli import main as workbench


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="workbench-out")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    argv = ["verify", "--all", "--out", args.out, "--jobs", str(args.jobs)]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    return workbench(argv)


if __name__ == "__main__":
    sys.exit(main())
