"""Grid convergence of lambda1 and of the strong residual on one rectangle."""

import argparse
import time

from crackstab.closedform import analytic_lambda1
from crackstab.elliptic import SlopeConfig
from crackstab.geometry import CrackedRectangle
from crackstab.spectral import lambda1_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--length", type=float, default=1.0)
    ap.add_argument("--height", type=float, default=1.0)
    ap.add_argument("--sizes", default="33,65,129,257,513")
    args = ap.parse_args()

    exact = analytic_lambda1(args.length, args.height)
    print("n,lambda1,rel_error,rate,residual,seconds")
    prev = None
    for n in (int(s) for s in args.sizes.split(",")):
        t0 = time.perf_counter()
        rep = lambda1_grid(CrackedRectangle(args.length, args.height, 0.0, n, n), SlopeConfig(), basis_size=min(32, n - 2))
        err = abs(rep.lambda1 - exact) / exact
        rate = "" if prev is None else f"{prev / err:.2f}"
        print(f"{n},{rep.lambda1!r},{err:.3e},{rate},{rep.residual_strong:.3e},{time.perf_counter() - t0:.1f}")
        prev = err


if __name__ == "__main__":
    main()
