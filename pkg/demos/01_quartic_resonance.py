"""Quartic zero-mode growth for u^4 on three frequency boxes.

The output at frequency 0 collects three exactly resonant tuples, so its
modulus grows linearly in T with slope 3 r^4 N^{-4s}.
"""
import argparse

import numpy as np

from nlsinflate.lattice import SpectralField, torus
from nlsinflate.picard import first_iterate
from nlsinflate.resonance import constraint_tuples
from nlsinflate.scenarios import quartic_zero_mode


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=256)
    ap.add_argument("--r", type=float, default=0.5)
    ap.add_argument("--s", type=float, default=-1 / 6)
    args = ap.parse_args()
    N, r, s = args.N, args.r, args.s
    a = r * N ** (-s)
    phi = SpectralField.static(torus(1), 1.0, [[-N], [2 * N], [3 * N]], [a, a, a])

    print("tuples reaching frequency 0 (q=1):")
    for tup, phase in constraint_tuples([(-N,), (2 * N,), (3 * N,)], 4, 1, (0,)):
        print("  ", [t[0] // N for t in tup], "x N   phase", phase)

    print(f"\n{'T':>10} {'|U_4(T,0)|':>14} {'3 r^4 N^-4s T':>14}")
    for T in np.geomspace(1e-6, 1e-3, 4):
        G = first_iterate(phi, 4, 1, T)
        print(f"{T:10.2e} {abs(G.value_at((0,), T)):14.6e} {quartic_zero_mode(r, N, s, T):14.6e}")


if __name__ == "__main__":
    main()
