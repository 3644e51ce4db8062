"""Finite-difference derivatives of the energy against the analytic variations.

Runs every combination of crack function and slope pair and prints one CSV
row per case.
"""

import argparse

from crackstab.acceptance import make_phi
from crackstab.elliptic import SlopeConfig
from crackstab.geometry import CrackedRectangle
from crackstab.secondvar import fd_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=257, help="grid nodes per direction")
    ap.add_argument("--phis", default="coslike:2,sin:1,sin:3")
    ap.add_argument("--h", type=float, default=None)
    args = ap.parse_args()

    domain = CrackedRectangle(1.0, 1.0, 0.0, args.n, args.n)
    print("phi,alpha,beta,g1,first_variation,g2,second_variation,g2_rel_error,passed")
    for spec in args.phis.split(","):
        for alpha, beta in ((1.0, 1.0), (1.0, 2.0)):
            r = fd_check(domain, make_phi(domain, spec), SlopeConfig(alpha, beta), args.h)
            print(f"{spec},{alpha},{beta},{r.g1:.8g},{r.first_variation:.8g},{r.g2:.8g},"
                  f"{r.second_variation:.8g},{r.g2_rel_error:.2e},{r.passed}")


if __name__ == "__main__":
    main()
