"""Stability map over (ell, y0) with the threshold contour.

Writes ``scan.csv`` (ell,y0,lambda1,stable,method) and ``contour.csv``
(y0,ell_star) to the output directory.
"""

import argparse
from pathlib import Path

import numpy as np

from crackstab.stability import ScanConfig, scan_lambda1, threshold_contour, to_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--method", default="analytic", choices=("analytic", "grid", "modes"))
    ap.add_argument("--n", type=int, default=41, help="points per axis")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    ells = np.linspace(0.25, 4.0, args.n)
    y0s = np.linspace(0.1, 2.0, args.n)
    rows = scan_lambda1(ells, y0s, ScanConfig(args.method, nx=129, ny=129, workers=args.workers))
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scan.csv").write_text(to_csv(rows, ("ell", "y0", "lambda1", "stable", "method")))
    (out / "contour.csv").write_text(to_csv(threshold_contour(y0s)))
    print(f"{sum(r.stable for r in rows)}/{len(rows)} stable configurations; CSV written to {out}")


if __name__ == "__main__":
    main()
