"""Conformal calibration sweep: rotation error and horn accuracy against N.

    python3 scripts/calibrate.py [--sizes 256 512 1024 2048]
"""
import argparse

import numpy as np

from rcinterp.conformal import build_cusp_map, calibration_report, parabolic_profile, verify_containment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 512, 1024, 2048])
    ap.add_argument("--c", type=float, default=np.pi / 8, help="parabolic profile coefficient")
    args = ap.parse_args()
    prof = parabolic_profile(args.c)
    print(f"{'N':>6} {'rotation':>10} {'max|Z|':>10} {'horn acc':>10} {'angle mgn':>10} {'arg mgn':>10}")
    for N in args.sizes:
        cal = calibration_report(N)
        G = build_cusp_map(prof, N=N)
        rep = verify_containment(G, prof)
        print(f"{N:6d} {cal['max_rotation_error']:10.2e} {cal['max_modulus']:10.6f} "
              f"{G.accuracy:10.2e} {rep['min_angle_margin']:10.2e} {rep['min_arg']:10.2e}")


if __name__ == "__main__":
    main()
