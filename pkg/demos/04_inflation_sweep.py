"""Ratio ||u(T)|| / ||phi|| across N for one schedule, with the fitted exponent."""
import argparse
import warnings

import numpy as np

from nlsinflate.scenarios import run_inflation, schedule_case


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--case", default="case6")
    ap.add_argument("--N", type=int, nargs="+", default=[64, 256, 1024, 4096])
    ap.add_argument("--rho", type=float, default=None, help="hold rho fixed by solving for T")
    args = ap.parse_args()
    warnings.simplefilter("ignore")

    ov = {} if args.rho is None else {"rho": args.rho}
    print(f"{'N':>6} {'T':>10} {'rho':>7} {'rho_hat':>8} {'ratio':>9} {'U_main':>10} valid")
    ratios = []
    for N in args.N:
        rep = run_inflation(schedule_case(args.case, N, ov), strict=False)
        ratios.append(rep.ratio)
        print(f"{N:6d} {rep.scenario.T:10.3e} {rep.rho:7.3f} {rep.rho_hat:8.3f} {rep.ratio:9.4f} "
              f"{rep.norm_Umain:10.4g} {rep.valid}")
    if len(ratios) > 1:
        slope = np.polyfit(np.log(args.N), np.log(ratios), 1)[0]
        print(f"fitted exponent {slope:.4f}")


if __name__ == "__main__":
    main()
