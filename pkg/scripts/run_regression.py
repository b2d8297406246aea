"""Run the regression suite and print one line per problem.

    python3 scripts/run_regression.py [--radial 256] [--angular 512] [--threads 1] [--out DIR]
"""
import argparse
import time
from pathlib import Path

from rcinterp.engine import EngineConfig, assemble_extension
from rcinterp.problems import regression_suite
from rcinterp.reporting import write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radial", type=int, default=256)
    ap.add_argument("--angular", type=int, default=512)
    ap.add_argument("--k-max", type=int, default=5)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=None, help="directory for per-problem reports")
    args = ap.parse_args()
    cfg = EngineConfig(k_max=args.k_max, grid_radial=args.radial, grid_angular=args.angular,
                       threads=args.threads, seed=args.seed)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
    failures = 0
    t_all = time.perf_counter()
    for p in regression_suite(cfg, args.seed):
        t0 = time.perf_counter()
        res = assemble_extension(p)
        rep = res.report
        failures += not rep["ok"]
        bad = [k for k, v in rep["checks"].items() if not v]
        print(f"{p.name:12s} ok={rep['ok']!s:5s} margin={rep['interior_margin']:.4f} "
              f"residual={rep['interp_residual']:.1e} chain_gap={rep['chain_min_gap']:.2e} "
              f"k_max={rep['k_max']} {time.perf_counter() - t0:5.1f}s {' '.join(bad)}")
        if args.out:
            write_json(args.out / f"{p.name}.json", res.to_json())
    print(f"{failures} failures, {time.perf_counter() - t_all:.1f}s total")
    raise SystemExit(1 if failures else 0)


if __name__ == "__main__":
    main()
