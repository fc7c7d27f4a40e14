#!/usr/bin/env python3
"""Heart-disease proxy recipe.

Input: a CSV with columns ldl, chol and chd (any letter case). The public
South African heart-disease table (https://hastie.su.domains/ElemStatLearn/,
file SAheart.data) has ldl and chd but no total-cholesterol column, so the
chol values have to come from the original study records.

Steps: log-transform both predictors, delete the smallest chol, the two
largest chol, the three smallest and two largest ldl and then the eight
points farthest from the first least-squares line (one shot, no refit in
between), fit log(chol) = a + b log(ldl), estimate the error variance from
the residuals, and fit the ratio estimator of E(chd | log chol) with a
Gaussian error of that variance.

    scripts/heart_disease.py data.csv [--cli build/coarsereg] [--grid lo:hi:count] [-o curve.csv]
"""

import argparse
import csv
import math
import os
import subprocess
import sys
import tempfile


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("data")
    ap.add_argument("--cli", default=os.path.join(os.path.dirname(__file__), "..", "build", "coarsereg"))
    ap.add_argument("--grid", help="evaluation grid on the log(chol) scale (default: data range, 201 points)")
    ap.add_argument("-o", "--output", default="-")
    ap.add_argument("--format", choices=["csv", "json"], default="json")
    args = ap.parse_args()

    with open(args.data, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = {name.lower(): name for name in reader.fieldnames or []}
        missing = [c for c in ("ldl", "chol", "chd") if c not in cols]
        if missing:
            sys.exit(f"{args.data}: missing column(s) {', '.join(missing)}")
        rows = [(r[cols["ldl"]], r[cols["chol"]], r[cols["chd"]]) for r in reader]

    grid = args.grid
    if grid is None:
        logs = [math.log(float(c)) for _, c, _ in rows]
        grid = f"{min(logs)}:{max(logs)}:201"

    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False, newline="") as tmp:
        out = csv.writer(tmp)
        out.writerow(["t", "x", "y"])
        out.writerows(rows)
        path = tmp.name
    try:
        cmd = [args.cli, "fit-proxy", "--input", path, "--log",
               "--trim-x", "1:2", "--trim-t", "3:2", "--drop-farthest", "8",
               "--grid", grid, "--format", args.format, "-o", args.output]
        return subprocess.call(cmd)
    finally:
        os.unlink(path)


if __name__ == "__main__":
    sys.exit(main())
