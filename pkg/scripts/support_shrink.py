"""Localized lambda1 on shrinking supports of an unstable rectangle, and thin rectangles."""

import argparse

from crackstab.stability import ScanConfig, support_shrink, tubular_shrink


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--length", type=float, default=3.0)
    ap.add_argument("--height", type=float, default=1.0)
    args = ap.parse_args()

    ell = args.length
    rep = support_shrink(ell, args.height, [ell / 2 / 2**k for k in range(5)])
    print(f"global lambda1 = {rep.global_lambda1:.6f}")
    print("radius,lambda1,stable")
    for r in rep.rows:
        print(f"{r.radius:.6g},{r.lambda1:.6f},{r.stable}")

    tub = tubular_shrink(ell, [0.1, 0.03, 0.01, 3e-3, 1e-3], ScanConfig("modes"), fit_below=3e-3)
    print(f"\nthin rectangles: lambda1 / y0 -> {tub.slope:.5f} (limit 4)")
    for r in tub.rows:
        print(f"y0={r.y0:.0e} lambda1={r.lambda1:.6e} ratio={r.ratio:.5f}")


if __name__ == "__main__":
    main()
