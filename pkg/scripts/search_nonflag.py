"""Deterministic search for a small system of linear forms violating the flag condition.

Candidates are 4-form systems on Z^2 built from primitive, pairwise
non-proportional rows with |coeff| <= 3, ordered by total coefficient
weight and then lexicographically. The first non-flag system with
independence degree 2 is printed; the package ships it as
``flagforms.linear_systems.NON_FLAG_EXAMPLE``.

Usage:
  python scripts/search_nonflag.py [--bound 3] [--kmax 6]
"""

import argparse
import itertools
import json
from math import gcd

from flagforms.linear_systems import LinearSystem, independence_degree, is_flag


def primitive_rows(bound):
    for r in itertools.product(range(-bound, bound + 1), repeat=2):
        if not any(r) or gcd(*r) != 1:
            continue
        lead = next(v for v in r if v)
        if lead > 0:
            yield r


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--bound", type=int, default=3)
    ap.add_argument("--kmax", type=int, default=6)
    args = ap.parse_args()

    rows = sorted(primitive_rows(args.bound), key=lambda r: (sum(map(abs, r)), r))
    cands = sorted(
        itertools.combinations(rows, 4),
        key=lambda c: (sum(abs(v) for r in c for v in r), c),
    )
    for combo in cands:
        system = LinearSystem.from_rows(combo)
        report = is_flag(system, args.kmax)
        if report.is_flag_up_to_kmax:
            continue
        if independence_degree(system) != 2:
            continue
        print(json.dumps({"system": system.to_json(), "pretty": str(system),
                          "first_violation": report.first_violation}))
        return


if __name__ == "__main__":
    main()
