"""Experiment: vary the factor in Psi = factor * omega^{-1} and rerun the regression suite.

Larger factors give fatter angle profiles theta_k. The audits still decide
whether the resulting extension is certified.

    python3 scripts/psi_factor.py [--factors 0.5 0.75 1.0] [--radial 128] [--angular 256]
"""
import argparse

import numpy as np

from rcinterp.engine import EngineConfig, EngineError, assemble_extension
from rcinterp.problems import regression_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--factors", type=float, nargs="+", default=[0.5, 0.75, 1.0])
    ap.add_argument("--radial", type=int, default=128)
    ap.add_argument("--angular", type=int, default=256)
    args = ap.parse_args()
    for factor in args.factors:
        cfg = EngineConfig(grid_radial=args.radial, grid_angular=args.angular, psi_factor=factor)
        margins, peaks, gaps, failed = [], [], [], []
        for p in regression_suite(cfg):
            try:
                res = assemble_extension(p)
            except EngineError as exc:
                failed.append(f"{p.name}: {exc}")
                continue
            rep = res.report
            margins.append(rep["interior_margin"])
            gaps.append(min(rep["chain_min_gap"], rep["chain_eps_min_gap"]))
            peaks.append(max(th.theta.max() for th in res.schedule.theta))
            if not rep["ok"]:
                failed.append(p.name + ": " + " ".join(k for k, v in rep["checks"].items() if not v))
        print(f"factor {factor:.2f}: min margin {np.min(margins):.4f}, max theta peak {np.max(peaks):.4f}, "
              f"min chain gap {np.min(gaps):.2e}, failures {len(failed)}")
        for line in failed:
            print("   ", line)


if __name__ == "__main__":
    main()
