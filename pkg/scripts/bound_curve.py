"""Tabulate the stability factor E_beta(L T^beta) over a beta grid.

Writes one CSV row per (L, beta) and prints whether each curve is strictly
increasing.  Feed the CSV to any plotter to see the curve shape.

    python3 scripts/bound_curve.py --out bound.csv
"""

import argparse
import csv
import sys

from frond.special_fn import bound_monotonicity_scan


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=float, nargs="+", default=[0.3, 0.5, 0.7, 0.9])
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--n-grid", type=int, default=10, help="grid is 1/n, 2/n, ..., 1")
    ap.add_argument("--out", default="-", help="CSV path, or - for stdout")
    args = ap.parse_args(argv)

    grid = [i / args.n_grid for i in range(1, args.n_grid + 1)]
    scans = [bound_monotonicity_scan(L, args.T, grid) for L in args.L]

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["L", "T", "beta", "bound"])
        for s in scans:
            for beta, bound in s.rows():
                w.writerow([s.L, s.T, beta, repr(bound)])
    finally:
        if fh is not sys.stdout:
            fh.close()

    for s in scans:
        print(f"L={s.L:g} T={s.T:g}: strictly increasing = {s.strictly_increasing}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
